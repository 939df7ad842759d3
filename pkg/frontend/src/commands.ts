/** Maps console controls onto POST /command bodies, with a per-control
 * debounce so double-clicks cannot double-send. */

export const PAD_LINEAR = 0.2;
export const PAD_ANGULAR = Math.PI / 4;

export type UiEvent =
  | { kind: "pad"; direction: "forward" | "backward" | "left" | "right" }
  | { kind: "stop" }
  | { kind: "transcript"; text: string }
  | { kind: "dialogAck"; yes: boolean }
  | { kind: "dialogSource"; lang: string }
  | { kind: "dialogTarget"; lang: string }
  | { kind: "dialogReset" };

const PAD_TWISTS = {
  forward: { linear: PAD_LINEAR, angular: 0 },
  backward: { linear: -PAD_LINEAR, angular: 0 },
  left: { linear: 0, angular: PAD_ANGULAR },
  right: { linear: 0, angular: -PAD_ANGULAR },
} as const;

/** The exact JSON body POSTed to /command for a UI event. */
export function commandBody(event: UiEvent): Record<string, unknown> {
  switch (event.kind) {
    case "pad":
      return { drive: PAD_TWISTS[event.direction] };
    case "stop":
      return { stop: true };
    case "transcript":
      return { transcript: event.text };
    case "dialogAck":
      return { dialog: { ack: event.yes } };
    case "dialogSource":
      return { dialog: { source: event.lang } };
    case "dialogTarget":
      return { dialog: { target: event.lang } };
    case "dialogReset":
      return { dialog: { reset: true } };
  }
}

/** A stable key identifying the control for debounce purposes. */
export function controlKey(event: UiEvent): string {
  switch (event.kind) {
    case "pad":
      return `pad:${event.direction}`;
    case "transcript":
      return "transcript";
    default:
      return event.kind;
  }
}

/** Drops repeat fires of the same control inside the window. */
export class Debouncer {
  private last = new Map<string, number>();

  constructor(
    private windowMs = 300,
    private now: () => number = () => Date.now(),
  ) {}

  shouldSend(key: string): boolean {
    const t = this.now();
    const previous = this.last.get(key);
    if (previous !== undefined && t - previous < this.windowMs) {
      return false;
    }
    this.last.set(key, t);
    return true;
  }
}

/** Keyboard mapping: arrows drive, space stops. Returns null for keys
 * the console does not own. */
export function keyToEvent(key: string): UiEvent | null {
  switch (key) {
    case "ArrowUp":
      return { kind: "pad", direction: "forward" };
    case "ArrowDown":
      return { kind: "pad", direction: "backward" };
    case "ArrowLeft":
      return { kind: "pad", direction: "left" };
    case "ArrowRight":
      return { kind: "pad", direction: "right" };
    case " ":
      return { kind: "stop" };
    default:
      return null;
  }
}
