"""Hot per-frame post-processing kernels.

A compiled extension carries the fused decode/score loop and the greedy
suppression loop; when it is not built the numpy fallback is selected at
import time. Both expose the same array-level API:

    decode_score(values, grid, slots, classes, threshold)
        -> (boxes, scores, class_ids)  survivors in (row, col, slot) order
    nms_keep(boxes, scores, class_ids, iou_threshold)
        -> kept indices, best first

`benchmarks/bench_postprocess.py` compares the two.
"""

from . import fallback

try:
    from . import _native
except ImportError:  # extension not built
    _native = None

HAVE_NATIVE = _native is not None

if HAVE_NATIVE:
    decode_score = _native.decode_score
    nms_keep = _native.nms_keep
else:
    decode_score = fallback.decode_score
    nms_keep = fallback.nms_keep

__all__ = ["HAVE_NATIVE", "decode_score", "nms_keep", "fallback"]
