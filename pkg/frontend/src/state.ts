/** Console state and the reducer applying WebSocket pushes. */

import type { DialogView, Snapshot, WsMessage } from "./api.js";

export type Connection = "connecting" | "open" | "closed";

export interface ConsoleState {
  connection: Connection;
  snapshot: Snapshot | null;
  overlayEnabled: boolean;
  promptQueue: DialogView[];
  lastError: string | null;
}

export function initialState(): ConsoleState {
  return {
    connection: "connecting",
    snapshot: null,
    overlayEnabled: true,
    promptQueue: [],
    lastError: null,
  };
}

export type StateEvent =
  | { type: "ws-open" }
  | { type: "ws-closed" }
  | { type: "ws-message"; message: WsMessage }
  | { type: "toggle-overlay" }
  | { type: "command-error"; message: string }
  | { type: "command-ok" }
  | { type: "prompt-consumed" };

export function reduce(state: ConsoleState, event: StateEvent): ConsoleState {
  switch (event.type) {
    case "ws-open":
      return { ...state, connection: "open" };
    case "ws-closed":
      return { ...state, connection: "closed" };
    case "ws-message": {
      const { message } = event;
      if (message.type === "snapshot") {
        return { ...state, snapshot: message.data as Snapshot };
      }
      if (message.type === "prompt") {
        return {
          ...state,
          promptQueue: [...state.promptQueue, message.data as DialogView],
        };
      }
      return state;
    }
    case "toggle-overlay":
      return { ...state, overlayEnabled: !state.overlayEnabled };
    case "command-error":
      return { ...state, lastError: event.message };
    case "command-ok":
      return { ...state, lastError: null };
    case "prompt-consumed":
      return { ...state, promptQueue: state.promptQueue.slice(1) };
  }
}

/** The dialog panel shows the freshest prompt, falling back to the
 * snapshot's dialog view. */
export function currentDialog(state: ConsoleState): DialogView | null {
  if (state.promptQueue.length > 0) {
    return state.promptQueue[state.promptQueue.length - 1];
  }
  return state.snapshot ? state.snapshot.dialog : null;
}

/** Heading arrow angle in radians; equals the snapshot's pose theta. */
export function headingRad(state: ConsoleState): number | null {
  const telemetry = state.snapshot?.telemetry;
  return telemetry ? telemetry.pose.theta : null;
}
