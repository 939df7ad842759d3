"""Numpy implementations of the post-processing kernels.

Float semantics are pinned so results are bit-identical to the compiled
kernel: tensor values are widened float32 -> float64 before any
arithmetic, and every expression mirrors the compiled loop.
"""

from __future__ import annotations

import numpy as np


def decode_score(
    values: np.ndarray,
    grid: int,
    slots: int,
    classes: int,
    threshold: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fused grid decode + class scoring over one detection tensor.

    `values` is float32 with shape (grid, grid, slots*5 + classes).
    Returns corner-form boxes clamped to [0,1] (n,4 float64), scores
    (n float64) and class ids (n int32) for candidates whose best score
    clears the threshold, in (row, col, slot) order.
    """
    v = values.astype(np.float64)
    rows = np.arange(grid, dtype=np.float64)
    cols = np.arange(grid, dtype=np.float64)

    block = v[:, :, : slots * 5].reshape(grid, grid, slots, 5)
    probs = v[:, :, slots * 5 :]

    cx = (cols[None, :, None] + block[:, :, :, 0]) / grid
    cy = (rows[:, None, None] + block[:, :, :, 1]) / grid
    w = block[:, :, :, 2]
    h = block[:, :, :, 3]
    conf = block[:, :, :, 4]

    # (grid, grid, slots, classes) score table; argmax takes the first max,
    # matching the compiled strictly-greater scan.
    scores = conf[:, :, :, None] * probs[:, :, None, :]
    class_ids = scores.argmax(axis=3)
    best = np.take_along_axis(scores, class_ids[:, :, :, None], axis=3)[:, :, :, 0]

    boxes = np.stack(
        [
            np.clip(cx - w / 2.0, 0.0, 1.0),
            np.clip(cy - h / 2.0, 0.0, 1.0),
            np.clip(cx + w / 2.0, 0.0, 1.0),
            np.clip(cy + h / 2.0, 0.0, 1.0),
        ],
        axis=3,
    )

    keep = (best >= threshold).ravel()
    return (
        np.ascontiguousarray(boxes.reshape(-1, 4)[keep]),
        np.ascontiguousarray(best.ravel()[keep]),
        np.ascontiguousarray(class_ids.ravel()[keep].astype(np.int32)),
    )


def _iou(a: np.ndarray, b: np.ndarray) -> float:
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def nms_keep(
    boxes: np.ndarray,
    scores: np.ndarray,
    class_ids: np.ndarray,
    iou_threshold: float,
) -> np.ndarray:
    """Greedy class-aware suppression; returns kept indices, best first.

    Order: score descending, ties by lower class id, then input order.
    A candidate is discarded when a kept detection of the same class
    overlaps it with IOU strictly above the threshold.
    """
    n = len(scores)
    order = sorted(range(n), key=lambda k: (-scores[k], class_ids[k], k))
    kept: list[int] = []
    for k in order:
        ok = True
        for j in kept:
            if class_ids[j] == class_ids[k] and _iou(boxes[j], boxes[k]) > iou_threshold:
                ok = False
                break
        if ok:
            kept.append(k)
    return np.asarray(kept, dtype=np.int32)
