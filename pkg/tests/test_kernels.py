"""Parity between the compiled kernels and the numpy fallback.

When the extension is not built the parity checks skip; the fallback
itself is still covered against the staged reference everywhere else.
"""

import numpy as np
import pytest

from sentrybot import _kernels
from sentrybot._kernels import fallback

from support import random_detections, random_tensor

needs_native = pytest.mark.skipif(not _kernels.HAVE_NATIVE,
                                  reason="compiled kernel not built")


def _det_arrays(dets):
    boxes = np.array([d.box.as_tuple() for d in dets], dtype=np.float64).reshape(-1, 4)
    scores = np.array([d.score for d in dets], dtype=np.float64)
    ids = np.array([d.class_id for d in dets], dtype=np.int32)
    return boxes, scores, ids


class TestFallbackKernels:
    def test_decode_score_threshold_zero_emits_everything(self):
        rng = np.random.default_rng(0)
        t = random_tensor(rng, 4, 2, 3)
        boxes, scores, ids = fallback.decode_score(t.values, 4, 2, 3, 0.0)
        assert len(scores) == 4 * 4 * 2
        assert boxes.shape == (32, 4)
        assert ids.dtype == np.int32

    def test_nms_keep_empty(self):
        out = fallback.nms_keep(np.zeros((0, 4)), np.zeros(0),
                                np.zeros(0, dtype=np.int32), 0.5)
        assert len(out) == 0


@needs_native
class TestNativeParity:
    def test_decode_score_bit_identical(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            grid = int(rng.integers(1, 14))
            slots = int(rng.integers(1, 4))
            classes = int(rng.integers(1, 81))
            threshold = float(rng.random() * 0.9)
            t = random_tensor(rng, grid, slots, classes)
            fb = fallback.decode_score(t.values, grid, slots, classes, threshold)
            nat = _kernels.decode_score(t.values, grid, slots, classes, threshold)
            for a, b in zip(fb, nat):
                assert np.array_equal(a, b)

    def test_nms_keep_identical(self):
        import random

        rng = random.Random(2)
        for trial in range(200):
            dets = random_detections(rng, rng.randrange(0, 64),
                                     quantized=trial % 2 == 0)
            boxes, scores, ids = _det_arrays(dets)
            fb = fallback.nms_keep(boxes, scores, ids, 0.45)
            nat = _kernels.nms_keep(boxes, scores, ids, 0.45)
            assert np.array_equal(fb, nat)

    def test_selected_backend_is_native_when_built(self):
        assert _kernels.decode_score is not fallback.decode_score
