"""Axis-aligned box geometry shared by tensor decode, NMS and overlays.

All coordinates are normalized to [0, 1] with the origin at the top-left
of the image. Corner form is the canonical interchange form; centre form
only exists between tensor decode and the conversion here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def _all_finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class BBox:
    """Corner-form box: (x_min, y_min) top-left, (x_max, y_max) bottom-right."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not _all_finite(self.x_min, self.y_min, self.x_max, self.y_max):
            raise ValueError("box coordinates must be finite")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError("box corners out of order")

    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class CenterBox:
    """Centre-form box; width and height are relative to the whole image.

    The centre may sit near an image edge, so the corner form can spill
    outside [0, 1] before clamping.
    """

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not _all_finite(self.cx, self.cy, self.w, self.h):
            raise ValueError("box fields must be finite")
        if self.w < 0.0 or self.h < 0.0:
            raise ValueError("width and height must be non-negative")


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes.

    Total on all valid boxes: a zero-area union yields 0 rather than an
    error, so degenerate boxes flow through NMS without special cases.
    """
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def _clamp01(v: float) -> float:
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


def center_to_corners(c: CenterBox) -> BBox:
    """Corner form of a centre-form box, clamped into the unit square."""
    return BBox(
        _clamp01(c.cx - c.w / 2.0),
        _clamp01(c.cy - c.h / 2.0),
        _clamp01(c.cx + c.w / 2.0),
        _clamp01(c.cy + c.h / 2.0),
    )
