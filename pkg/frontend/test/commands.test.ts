import { describe, expect, it } from "vitest";

import { Debouncer, commandBody, controlKey, keyToEvent } from "../src/commands.js";

describe("commandBody", () => {
  it("maps the stop button", () => {
    expect(commandBody({ kind: "stop" })).toEqual({ stop: true });
  });

  it("maps the forward pad to the fixed cruise twist", () => {
    expect(commandBody({ kind: "pad", direction: "forward" })).toEqual({
      drive: { linear: 0.2, angular: 0 },
    });
  });

  it("maps turns to +/- quarter-pi angular", () => {
    expect(commandBody({ kind: "pad", direction: "left" })).toEqual({
      drive: { linear: 0, angular: Math.PI / 4 },
    });
    expect(commandBody({ kind: "pad", direction: "right" })).toEqual({
      drive: { linear: 0, angular: -Math.PI / 4 },
    });
  });

  it("wraps transcripts verbatim", () => {
    expect(commandBody({ kind: "transcript", text: "turn left" })).toEqual({
      transcript: "turn left",
    });
  });

  it("maps dialog events", () => {
    expect(commandBody({ kind: "dialogAck", yes: true })).toEqual({
      dialog: { ack: true },
    });
    expect(commandBody({ kind: "dialogSource", lang: "hi" })).toEqual({
      dialog: { source: "hi" },
    });
    expect(commandBody({ kind: "dialogTarget", lang: "en" })).toEqual({
      dialog: { target: "en" },
    });
    expect(commandBody({ kind: "dialogReset" })).toEqual({
      dialog: { reset: true },
    });
  });
});

describe("Debouncer", () => {
  it("drops a duplicate inside the window", () => {
    let t = 0;
    const d = new Debouncer(300, () => t);
    expect(d.shouldSend("stop")).toBe(true);
    t = 299;
    expect(d.shouldSend("stop")).toBe(false);
    t = 300;
    expect(d.shouldSend("stop")).toBe(true);
  });

  it("tracks controls independently", () => {
    let t = 0;
    const d = new Debouncer(300, () => t);
    expect(d.shouldSend("pad:forward")).toBe(true);
    expect(d.shouldSend("stop")).toBe(true);
    t = 100;
    expect(d.shouldSend("pad:forward")).toBe(false);
    expect(d.shouldSend("pad:backward")).toBe(true);
  });

  it("double-click produces exactly one send", () => {
    let t = 1000;
    const d = new Debouncer(300, () => t);
    const sends = ["stop", "stop"].filter((k) => d.shouldSend(k));
    expect(sends).toHaveLength(1);
  });
});

describe("keyToEvent", () => {
  it("maps arrows to the pad and space to stop", () => {
    expect(keyToEvent("ArrowUp")).toEqual({ kind: "pad", direction: "forward" });
    expect(keyToEvent("ArrowDown")).toEqual({ kind: "pad", direction: "backward" });
    expect(keyToEvent("ArrowLeft")).toEqual({ kind: "pad", direction: "left" });
    expect(keyToEvent("ArrowRight")).toEqual({ kind: "pad", direction: "right" });
    expect(keyToEvent(" ")).toEqual({ kind: "stop" });
    expect(keyToEvent("x")).toBeNull();
  });
});

describe("controlKey", () => {
  it("distinguishes pad directions", () => {
    expect(controlKey({ kind: "pad", direction: "forward" })).not.toBe(
      controlKey({ kind: "pad", direction: "backward" }),
    );
  });
});
