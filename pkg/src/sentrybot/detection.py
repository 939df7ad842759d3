"""Detection tensor decode, scoring, suppression and pixel mapping.

The inference network itself sits behind `InferenceBackend`; everything
here is post-processing of its output tensor. The grid layout is
cell-relative box centres with image-relative width/height, one
confidence per box slot and one conditional class-probability vector per
cell. A detection's score is the slot confidence multiplied by the best
class probability of its cell.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from importlib import resources
from typing import Protocol, Sequence

import numpy as np

from . import _kernels
from .geometry import BBox, CenterBox, center_to_corners, iou

DTEN_MAGIC = b"DTEN"
DTEN_HEADER = struct.Struct("<4sIII")

# JPEG APP4 sidecar used by the simulator's oracle camera: the ground-truth
# tensor rides inside the frame it describes.
SIDECAR_TAG = b"DTENCHNK"
_SIDECAR_CHUNK = 60000


class ConfigError(ValueError):
    """Tensor and grid configuration disagree."""


class BackendError(RuntimeError):
    """The inference backend failed or returned garbage."""


class PipelineError(RuntimeError):
    """Frame processing failed; carries the frame timestamp."""

    def __init__(self, timestamp_ms: int, message: str):
        super().__init__(message)
        self.timestamp_ms = timestamp_ms


def load_coco_names() -> tuple[str, ...]:
    text = resources.files("sentrybot.data").joinpath("coco_names.txt").read_text("utf-8")
    return tuple(line.strip() for line in text.splitlines() if line.strip())


@dataclass(frozen=True)
class GridConfig:
    """Grid layout and thresholds for one detection head."""

    grid_size: int
    boxes_per_cell: int
    class_names: tuple[str, ...]
    score_threshold: float = 0.5
    nms_iou_threshold: float = 0.45

    def __post_init__(self) -> None:
        if self.grid_size < 1 or self.boxes_per_cell < 1 or len(self.class_names) < 1:
            raise ConfigError("grid_size, boxes_per_cell and class count must be >= 1")
        for t in (self.score_threshold, self.nms_iou_threshold):
            if not 0.0 <= t <= 1.0:
                raise ConfigError("thresholds must lie in [0, 1]")

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def channels(self) -> int:
        return self.boxes_per_cell * 5 + self.class_count

    @classmethod
    def coco_default(cls, **overrides) -> "GridConfig":
        """13x13 grid, 3 boxes per cell, the 80 COCO classes."""
        kwargs = dict(grid_size=13, boxes_per_cell=3, class_names=load_coco_names())
        kwargs.update(overrides)
        return cls(**kwargs)


@dataclass(frozen=True)
class DetectionTensor:
    """Raw per-cell network output, row-major (row, col, channel).

    Per cell: boxes_per_cell blocks of (x, y, w, h, confidence), then the
    class probability channels. All values are post-activation in [0, 1].
    """

    values: np.ndarray
    grid_size: int
    boxes_per_cell: int
    class_count: int

    def __post_init__(self) -> None:
        expected = (self.grid_size, self.grid_size, self.boxes_per_cell * 5 + self.class_count)
        v = self.values
        if v.shape != expected:
            raise ConfigError(f"tensor shape {v.shape} != expected {expected}")
        if v.dtype != np.float32:
            raise ConfigError("tensor must be float32")
        if not np.all(np.isfinite(v)):
            raise ConfigError("tensor contains non-finite values")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ConfigError("tensor values must lie in [0, 1]")

    @classmethod
    def from_flat(cls, flat: Sequence[float] | np.ndarray, grid_size: int,
                  boxes_per_cell: int, class_count: int) -> "DetectionTensor":
        arr = np.asarray(flat, dtype=np.float32)
        channels = boxes_per_cell * 5 + class_count
        if arr.size != grid_size * grid_size * channels:
            raise ConfigError("flat tensor length does not match the grid layout")
        return cls(arr.reshape(grid_size, grid_size, channels),
                   grid_size, boxes_per_cell, class_count)

    def matches(self, cfg: GridConfig) -> bool:
        return (self.grid_size == cfg.grid_size
                and self.boxes_per_cell == cfg.boxes_per_cell
                and self.class_count == cfg.class_count)


@dataclass(frozen=True)
class Candidate:
    """One decoded box slot with its cell's class probability vector."""

    box: CenterBox
    confidence: float
    class_probs: tuple[float, ...]
    row: int
    col: int
    slot: int


@dataclass(frozen=True)
class Detection:
    """A scored detection in normalized image coordinates."""

    box: BBox
    class_id: int
    class_name: str
    score: float


@dataclass(frozen=True)
class PixelDetection:
    """A detection mapped back to source-image pixels."""

    class_id: int
    class_name: str
    score: float
    box: tuple[int, int, int, int]


@dataclass(frozen=True)
class DetectionSet:
    """Pixel-space detections for one frame, in score order."""

    timestamp_ms: int
    items: tuple[PixelDetection, ...] = field(default_factory=tuple)


class InferenceBackend(Protocol):
    """Seam for the object-detection network."""

    def infer(self, frame: bytes, cfg: GridConfig) -> DetectionTensor: ...


def decode_grid(t: DetectionTensor, cfg: GridConfig) -> list[Candidate]:
    """All grid_size^2 * boxes_per_cell candidates, cell offsets applied.

    Box centres are cell-relative in the tensor; here (col + x) / grid and
    (row + y) / grid move them to image coordinates. Width and height are
    already image-relative and pass through unchanged.
    """
    if not t.matches(cfg):
        raise ConfigError("tensor layout does not match the grid config")
    s = cfg.grid_size
    nb = cfg.boxes_per_cell
    out: list[Candidate] = []
    v = t.values
    for i in range(s):
        for j in range(s):
            cell = v[i, j]
            probs = tuple(float(p) for p in cell[nb * 5 :])
            for b in range(nb):
                x, y, w, h, conf = (float(q) for q in cell[b * 5 : b * 5 + 5])
                box = CenterBox((j + x) / s, (i + y) / s, w, h)
                out.append(Candidate(box, conf, probs, i, j, b))
    return out


def score_candidates(candidates: Sequence[Candidate], cfg: GridConfig) -> list[Detection]:
    """One detection per candidate at its best class, thresholded.

    score_i = confidence * class_prob_i; the argmax class wins (ties go to
    the lower class id) and candidates whose best score falls below the
    threshold are dropped.
    """
    out: list[Detection] = []
    for c in candidates:
        best_k = 0
        best = -1.0
        for k, p in enumerate(c.class_probs):
            s = c.confidence * p
            if s > best:
                best = s
                best_k = k
        if best < cfg.score_threshold:
            continue
        out.append(Detection(center_to_corners(c.box), best_k,
                             cfg.class_names[best_k], best))
    return out


def nms(dets: Sequence[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy class-aware non-maximum suppression.

    Sort order is fully specified for determinism: score descending, ties
    by lower class id, then input order. Detections of different classes
    never suppress each other.
    """
    order = sorted(range(len(dets)), key=lambda k: (-dets[k].score, dets[k].class_id, k))
    kept: list[Detection] = []
    for k in order:
        d = dets[k]
        if any(kd.class_id == d.class_id and iou(kd.box, d.box) > iou_threshold
               for kd in kept):
            continue
        kept.append(d)
    return kept


def postprocess_tensor(t: DetectionTensor, cfg: GridConfig) -> list[Detection]:
    """decode + score + NMS through the selected kernel backend.

    Equivalent to decode_grid -> score_candidates -> nms; the kernels are
    the hot path and the staged functions are the reference.
    """
    if not t.matches(cfg):
        raise ConfigError("tensor layout does not match the grid config")
    boxes, scores, class_ids = _kernels.decode_score(
        t.values, cfg.grid_size, cfg.boxes_per_cell, cfg.class_count,
        cfg.score_threshold)
    keep = _kernels.nms_keep(boxes, scores, class_ids, cfg.nms_iou_threshold)
    return [
        Detection(
            BBox(*(float(q) for q in boxes[k])),
            int(class_ids[k]),
            cfg.class_names[int(class_ids[k])],
            float(scores[k]),
        )
        for k in keep
    ]


@dataclass(frozen=True)
class LetterboxMap:
    """Aspect-preserving fit of a source image into the network input.

    scale and the pads are derived so the invariant
    scale = min(net_w/src_w, net_h/src_h) holds by construction.
    """

    src_w: int
    src_h: int
    net_w: int
    net_h: int

    def __post_init__(self) -> None:
        if min(self.src_w, self.src_h, self.net_w, self.net_h) <= 0:
            raise ValueError("image dimensions must be positive")

    @property
    def scale(self) -> float:
        return min(self.net_w / self.src_w, self.net_h / self.src_h)

    @property
    def pad_x(self) -> float:
        return (self.net_w - self.src_w * self.scale) / 2.0

    @property
    def pad_y(self) -> float:
        return (self.net_h - self.src_h * self.scale) / 2.0

    @classmethod
    def identity(cls, src_w: int, src_h: int) -> "LetterboxMap":
        return cls(src_w, src_h, src_w, src_h)


def _round_half_up(v: float) -> int:
    import math

    return int(math.floor(v + 0.5))


def letterbox_to_image(b: BBox, m: LetterboxMap) -> tuple[int, int, int, int]:
    """Map a normalized net-input box back to source-image pixels."""
    scale = m.scale

    def px(nx: float) -> int:
        p = _round_half_up((nx * m.net_w - m.pad_x) / scale)
        return min(max(p, 0), m.src_w)

    def py(ny: float) -> int:
        p = _round_half_up((ny * m.net_h - m.pad_y) / scale)
        return min(max(p, 0), m.src_h)

    return (px(b.x_min), py(b.y_min), px(b.x_max), py(b.y_max))


def image_to_letterbox(box_px: tuple[float, float, float, float],
                       m: LetterboxMap) -> BBox:
    """Forward mapping: source pixels to normalized net-input coordinates."""
    scale = m.scale
    x0, y0, x1, y1 = box_px
    return BBox(
        (x0 * scale + m.pad_x) / m.net_w,
        (y0 * scale + m.pad_y) / m.net_h,
        (x1 * scale + m.pad_x) / m.net_w,
        (y1 * scale + m.pad_y) / m.net_h,
    )


def run_pipeline(frame: bytes, backend: InferenceBackend, cfg: GridConfig,
                 m: LetterboxMap, timestamp_ms: int = 0) -> DetectionSet:
    """infer -> decode -> score -> NMS -> pixel mapping, in score order."""
    try:
        tensor = backend.infer(frame, cfg)
        dets = postprocess_tensor(tensor, cfg)
    except Exception as exc:
        raise PipelineError(timestamp_ms, f"detection pipeline failed: {exc}") from exc
    items = tuple(
        PixelDetection(d.class_id, d.class_name, d.score, letterbox_to_image(d.box, m))
        for d in dets
    )
    return DetectionSet(timestamp_ms, items)


# --- fixture tensors on disk -------------------------------------------------

def save_tensor(path, t: DetectionTensor) -> None:
    """Write the DTEN fixture format: 16-byte header + little-endian f32."""
    header = DTEN_HEADER.pack(DTEN_MAGIC, t.grid_size, t.boxes_per_cell, t.class_count)
    flat = np.ascontiguousarray(t.values, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(flat.tobytes())


def tensor_to_bytes(t: DetectionTensor) -> bytes:
    header = DTEN_HEADER.pack(DTEN_MAGIC, t.grid_size, t.boxes_per_cell, t.class_count)
    return header + np.ascontiguousarray(t.values, dtype="<f4").tobytes()


def tensor_from_bytes(blob: bytes) -> DetectionTensor:
    if len(blob) < DTEN_HEADER.size:
        raise ConfigError("tensor blob shorter than its header")
    magic, s, b, c = DTEN_HEADER.unpack_from(blob, 0)
    if magic != DTEN_MAGIC:
        raise ConfigError("bad tensor magic")
    body = np.frombuffer(blob, dtype="<f4", offset=DTEN_HEADER.size)
    return DetectionTensor.from_flat(body, s, b, c)


def load_tensor(path) -> DetectionTensor:
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())


# --- oracle sidecar: tensors embedded in JPEG frames --------------------------

def embed_tensor_sidecar(jpeg: bytes, t: DetectionTensor) -> bytes:
    """Insert the tensor as APP4 segments right after the JPEG SOI marker.

    Decoders skip unknown APPn segments, so the frame stays a valid JPEG
    that still begins FFD8 and ends FFD9.
    """
    if jpeg[:2] != b"\xff\xd8":
        raise ValueError("not a JPEG (missing SOI)")
    blob = tensor_to_bytes(t)
    segments = bytearray()
    for off in range(0, len(blob), _SIDECAR_CHUNK):
        chunk = blob[off : off + _SIDECAR_CHUNK]
        payload = SIDECAR_TAG + chunk
        segments += b"\xff\xe4" + struct.pack(">H", len(payload) + 2) + payload
    return jpeg[:2] + bytes(segments) + jpeg[2:]


def extract_tensor_sidecar(jpeg: bytes) -> DetectionTensor | None:
    """Recover an embedded tensor, or None when the frame carries none."""
    if jpeg[:2] != b"\xff\xd8":
        return None
    pos = 2
    chunks: list[bytes] = []
    n = len(jpeg)
    while pos + 4 <= n:
        if jpeg[pos] != 0xFF:
            break
        marker = jpeg[pos + 1]
        if marker in (0xD8, 0xD9) or 0xD0 <= marker <= 0xD7 or marker == 0x01:
            pos += 2
            continue
        (seg_len,) = struct.unpack_from(">H", jpeg, pos + 2)
        if marker == 0xDA:  # start of scan: no more headers
            break
        payload = jpeg[pos + 4 : pos + 2 + seg_len]
        if marker == 0xE4 and payload.startswith(SIDECAR_TAG):
            chunks.append(payload[len(SIDECAR_TAG) :])
        pos += 2 + seg_len
    if not chunks:
        return None
    return tensor_from_bytes(b"".join(chunks))


class FixtureBackend:
    """Backend replaying one fixture tensor for every frame."""

    def __init__(self, path):
        self._tensor = load_tensor(path)

    def infer(self, frame: bytes, cfg: GridConfig) -> DetectionTensor:
        if not self._tensor.matches(cfg):
            raise BackendError("fixture tensor does not match the grid config")
        return self._tensor


class OracleBackend:
    """Backend reading the ground-truth tensor embedded in the frame itself.

    The simulator's camera plants the tensor it rendered into each JPEG;
    this backend closes the loop without any network.
    """

    def infer(self, frame: bytes, cfg: GridConfig) -> DetectionTensor:
        t = extract_tensor_sidecar(frame)
        if t is None:
            raise BackendError("frame carries no oracle tensor")
        if not t.matches(cfg):
            raise BackendError("oracle tensor does not match the grid config")
        return t
