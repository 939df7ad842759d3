/** DOM wiring: live MJPEG stream with a canvas overlay, drive pad,
 * transcript box, and the language dialog panel fed by /ws. */

import type { CommandResponse, DetectionsPayload, WsMessage } from "./api.js";
import { Debouncer, commandBody, controlKey, keyToEvent, UiEvent } from "./commands.js";
import { promptFor } from "./dialog.js";
import { overlayVisible, renderOverlay } from "./overlay.js";
import { ConsoleState, StateEvent, currentDialog, headingRad, initialState, reduce } from "./state.js";

const SOURCE_W = 640;
const SOURCE_H = 480;

let state: ConsoleState = initialState();
const debouncer = new Debouncer();
let languages: Record<string, string> = { en: "English" };

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function dispatch(event: StateEvent): void {
  state = reduce(state, event);
  render();
}

async function submit(event: UiEvent): Promise<void> {
  if (!debouncer.shouldSend(controlKey(event))) {
    return;
  }
  try {
    const resp = await fetch("/command", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(commandBody(event)),
    });
    const body = (await resp.json()) as CommandResponse;
    if (!body.ok && body.error) {
      dispatch({ type: "command-error", message: `${body.error.type}: ${body.error.message}` });
    } else {
      dispatch({ type: "command-ok" });
    }
  } catch (err) {
    dispatch({ type: "command-error", message: String(err) });
  }
}

function drawOverlay(): void {
  const canvas = $("overlay") as HTMLCanvasElement;
  const img = $("stream") as HTMLImageElement;
  const w = img.clientWidth || SOURCE_W;
  const h = img.clientHeight || SOURCE_H;
  canvas.width = w;
  canvas.height = h;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, w, h);
  const snap = state.snapshot;
  if (!state.overlayEnabled || !snap || !snap.detections) return;
  const frameTs = snap.frame ? snap.frame.timestamp_ms : null;
  if (!overlayVisible(frameTs, snap.detections.timestamp_ms)) return;
  ctx.strokeStyle = "#42d77d";
  ctx.fillStyle = "#42d77d";
  ctx.lineWidth = 2;
  ctx.font = "13px sans-serif";
  for (const rect of renderOverlay(snap.detections as DetectionsPayload, w, h, SOURCE_W, SOURCE_H)) {
    ctx.strokeRect(rect.x0, rect.y0, rect.x1 - rect.x0, rect.y1 - rect.y0);
    ctx.fillText(rect.label, rect.x0 + 3, Math.max(12, rect.y0 - 4));
  }
}

function render(): void {
  const status = $("status");
  status.textContent = state.connection;
  status.className = `status ${state.connection}`;

  const snap = state.snapshot;
  if (snap && snap.telemetry) {
    const p = snap.telemetry.pose;
    $("pose").textContent =
      `x ${p.x.toFixed(2)} m, y ${p.y.toFixed(2)} m, θ ${p.theta.toFixed(2)} rad`;
    $("battery").textContent = `${snap.telemetry.battery_pct.toFixed(0)}%`;
    const age = snap.link.telemetry_age_ms;
    $("linkage").textContent = age === null ? "n/a" : `${age} ms`;
    const heading = headingRad(state);
    if (heading !== null) {
      ($("heading") as HTMLElement).style.transform = `rotate(${-heading}rad)`;
    }
  }
  $("error").textContent = state.lastError ?? "";

  const dialogView = currentDialog(state);
  const panel = $("dialog");
  panel.replaceChildren();
  if (dialogView) {
    const prompt = promptFor(dialogView, languages);
    const text = document.createElement("div");
    text.className = "prompt";
    text.textContent = prompt.text;
    panel.appendChild(text);
    for (const choice of prompt.choices) {
      const button = document.createElement("button");
      button.textContent = choice.label;
      button.addEventListener("click", () => void submit(choice.event));
      panel.appendChild(button);
    }
  }
  drawOverlay();
}

function wireControls(): void {
  const padEvents: Record<string, UiEvent> = {
    "pad-forward": { kind: "pad", direction: "forward" },
    "pad-backward": { kind: "pad", direction: "backward" },
    "pad-left": { kind: "pad", direction: "left" },
    "pad-right": { kind: "pad", direction: "right" },
  };
  for (const [id, event] of Object.entries(padEvents)) {
    $(id).addEventListener("click", () => void submit(event));
  }
  $("stop").addEventListener("click", () => void submit({ kind: "stop" }));
  $("overlay-toggle").addEventListener("click", () => dispatch({ type: "toggle-overlay" }));

  const box = $("transcript") as HTMLInputElement;
  $("send").addEventListener("click", () => {
    if (box.value.trim()) {
      void submit({ kind: "transcript", text: box.value.trim() });
      box.value = "";
    }
  });
  box.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") $("send").click();
  });

  document.addEventListener("keydown", (ev) => {
    if (ev.target === box) return;
    const event = keyToEvent(ev.key);
    if (event) {
      ev.preventDefault();
      void submit(event);
    }
  });
}

function connectWs(): void {
  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  const ws = new WebSocket(`${proto}//${location.host}/ws`);
  ws.onopen = () => dispatch({ type: "ws-open" });
  ws.onclose = () => {
    dispatch({ type: "ws-closed" });
    setTimeout(connectWs, 1000);
  };
  ws.onmessage = (ev) => {
    const message = JSON.parse(ev.data as string) as WsMessage;
    dispatch({ type: "ws-message", message });
  };
}

window.addEventListener("load", () => {
  ($("stream") as HTMLImageElement).src = "/stream";
  wireControls();
  connectWs();
  render();
});
