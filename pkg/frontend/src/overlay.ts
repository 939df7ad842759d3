/** Detection overlay geometry: pure scaling from source-image pixels to
 * display pixels, plus the frame/detection timestamp match rule. */

import type { DetectionsPayload } from "./api.js";

export interface DrawRect {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  label: string;
}

/** Scale server pixel boxes into display coordinates. Labels carry the
 * class name and the score to two decimals. */
export function renderOverlay(
  detections: DetectionsPayload | null,
  displayW: number,
  displayH: number,
  sourceW: number,
  sourceH: number,
): DrawRect[] {
  if (!detections || sourceW <= 0 || sourceH <= 0) {
    return [];
  }
  const sx = displayW / sourceW;
  const sy = displayH / sourceH;
  return detections.items.map((item) => ({
    x0: item.box[0] * sx,
    y0: item.box[1] * sy,
    x1: item.box[2] * sx,
    y1: item.box[3] * sy,
    label: `${item.class} ${item.score.toFixed(2)}`,
  }));
}

/** The overlay must correspond to the displayed frame: hide it when the
 * two timestamps diverge by more than the skew budget. */
export function overlayVisible(
  frameTimestampMs: number | null,
  detectionTimestampMs: number | null,
  maxSkewMs = 500,
): boolean {
  if (frameTimestampMs === null || detectionTimestampMs === null) {
    return false;
  }
  return Math.abs(frameTimestampMs - detectionTimestampMs) <= maxSkewMs;
}
