/** Shapes of the central server's HTTP/WS payloads (field names are the
 * server's contract; do not rename). */

export interface PoseJson {
  x: number;
  y: number;
  theta: number;
}

export interface TelemetryJson {
  pose: PoseJson;
  battery_pct: number;
  link_age_ms: number;
  seq: number;
}

export interface DetectionItem {
  class: string;
  score: number;
  box: [number, number, number, number];
}

export interface DetectionsPayload {
  timestamp_ms: number | null;
  items: DetectionItem[];
}

export interface DialogView {
  phase: string;
  source: string | null;
  target: string | null;
  prompt: string;
}

export interface Snapshot {
  telemetry: TelemetryJson | null;
  detections: DetectionsPayload | null;
  dialog: DialogView;
  frame: { timestamp_ms: number } | null;
  link: { telemetry_age_ms: number | null };
  log_healthy: boolean;
}

export interface WsMessage {
  type: "snapshot" | "prompt";
  data: unknown;
}

export interface CommandError {
  type: string;
  message: string;
}

export interface CommandResponse {
  ok: boolean;
  error?: CommandError;
  [key: string]: unknown;
}
