"""Independent oracles shared by unit tests and the acceptance suite.

Everything here is written against the documented behavior, not against
the implementation: plain loops, scalar math, no imports from the
modules under test beyond constructing their input/output types.
"""

from __future__ import annotations

import math
import random

import numpy as np

from sentrybot.detection import Detection, DetectionTensor, GridConfig
from sentrybot.geometry import BBox


def random_tensor(rng: np.random.Generator, grid: int, slots: int,
                  classes: int) -> DetectionTensor:
    values = rng.random((grid, grid, slots * 5 + classes), dtype=np.float32)
    return DetectionTensor(values, grid, slots, classes)


def grid_config(grid: int, slots: int, classes: int, score_threshold=0.5,
                nms_iou_threshold=0.45) -> GridConfig:
    names = tuple(f"class{k:02d}" for k in range(classes))
    return GridConfig(grid, slots, names, score_threshold, nms_iou_threshold)


def oracle_decode_score(t: DetectionTensor, cfg: GridConfig):
    """Triple loop over (row, col, slot): recompute candidate boxes and
    the winning class score with scalar arithmetic."""
    s = cfg.grid_size
    nb = cfg.boxes_per_cell
    nc = cfg.class_count
    v = t.values
    candidates = []
    detections = []
    for i in range(s):
        for j in range(s):
            for b in range(nb):
                x = float(v[i, j, b * 5 + 0])
                y = float(v[i, j, b * 5 + 1])
                w = float(v[i, j, b * 5 + 2])
                h = float(v[i, j, b * 5 + 3])
                conf = float(v[i, j, b * 5 + 4])
                cx = (j + x) / s
                cy = (i + y) / s
                candidates.append((cx, cy, w, h, conf))
                best_k = 0
                best = -1.0
                for k in range(nc):
                    score = conf * float(v[i, j, nb * 5 + k])
                    if score > best:
                        best = score
                        best_k = k
                if best < cfg.score_threshold:
                    continue

                def clamp(q):
                    return min(1.0, max(0.0, q))

                corners = (clamp(cx - w / 2.0), clamp(cy - h / 2.0),
                           clamp(cx + w / 2.0), clamp(cy + h / 2.0))
                detections.append((corners, best_k, best))
    return candidates, detections


def oracle_iou(a, b) -> float:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    ix = min(ax1, bx1) - max(ax0, bx0)
    iy = min(ay1, by1) - max(ay0, by0)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union if union > 0 else 0.0


def oracle_nms(dets: list[Detection], threshold: float) -> list[Detection]:
    """Brute-force O(n^2) suppression over an index table.

    Implemented as a survivors bitmap scan rather than a keep-list loop,
    so a bookkeeping mistake in one strategy cannot hide in the other.
    """
    n = len(dets)
    ranked = sorted(range(n), key=lambda k: (-dets[k].score, dets[k].class_id, k))
    alive = [True] * n
    for pos, k in enumerate(ranked):
        if not alive[k]:
            continue
        for later in ranked[pos + 1:]:
            if not alive[later]:
                continue
            if dets[later].class_id != dets[k].class_id:
                continue
            if oracle_iou(dets[k].box.as_tuple(), dets[later].box.as_tuple()) > threshold:
                alive[later] = False
    return [dets[k] for k in ranked if alive[k]]


def random_detections(rng: random.Random, n: int, classes: int = 4,
                      quantized: bool = False) -> list[Detection]:
    """Random NMS instances; quantized=True forces score/geometry ties so
    tie-breaking rules actually get exercised."""
    out = []
    for _ in range(n):
        if quantized:
            x0 = rng.randrange(0, 8) / 10
            y0 = rng.randrange(0, 8) / 10
            x1 = x0 + rng.randrange(1, 3) / 10
            y1 = y0 + rng.randrange(1, 3) / 10
            score = rng.randrange(1, 11) / 10
        else:
            x0 = rng.uniform(0, 0.8)
            y0 = rng.uniform(0, 0.8)
            x1 = x0 + rng.uniform(0.01, 0.2)
            y1 = y0 + rng.uniform(0.01, 0.2)
            score = rng.random()
        class_id = rng.randrange(classes)
        out.append(Detection(BBox(x0, y0, min(x1, 1.0), min(y1, 1.0)),
                             class_id, f"class{class_id:02d}", score))
    return out


def crc32_reference(data: bytes) -> int:
    """Bitwise CRC-32 (reflected 0xEDB88320, init/xor 0xFFFFFFFF)."""
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            if crc & 1:
                crc = (crc >> 1) ^ 0xEDB88320
            else:
                crc >>= 1
    return crc ^ 0xFFFFFFFF


def oracle_project(world, cam, ob):
    """Independent pinhole projection of one obstacle (own trig)."""
    px, py, theta = world.robot_pose.x, world.robot_pose.y, world.robot_pose.theta
    ocx = (ob.x0 + ob.x1) / 2
    ocy = (ob.y0 + ob.y1) / 2
    dist = math.hypot(ocx - px, ocy - py)
    if dist == 0 or dist > cam.max_range:
        return None
    tan_half = math.tan(cam.fov / 2)
    us = []
    for gx, gy in ((ob.x0, ob.y0), (ob.x1, ob.y0), (ob.x1, ob.y1), (ob.x0, ob.y1)):
        rel = math.atan2(gy - py, gx - px) - theta
        while rel > math.pi:
            rel -= 2 * math.pi
        while rel <= -math.pi:
            rel += 2 * math.pi
        if abs(rel) >= math.pi / 2:
            continue
        us.append(0.5 - math.tan(rel) / (2 * tan_half))
    if not us:
        return None
    u_lo, u_hi = max(0.0, min(us)), min(1.0, max(us))
    if u_hi <= u_lo:
        return None
    focal = (cam.image_w / 2) / tan_half
    from sentrybot.sim import OBSTACLE_HEIGHT_M

    height = min(1.0, OBSTACLE_HEIGHT_M * focal / (dist * cam.image_h))
    return {"cx": (u_lo + u_hi) / 2, "cy": 0.5, "w": u_hi - u_lo,
            "h": height, "distance": dist}
