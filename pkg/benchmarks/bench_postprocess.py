#!/usr/bin/env python3
"""Benchmark the detection post-processing kernels.

Times decode+score+NMS per frame for the compiled kernel, the numpy
fallback, and the staged object-level reference, on the default
13x13x(3*5+80) layout. Run:

    python3 benchmarks/bench_postprocess.py [--frames 1000] [--grid 13]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sentrybot import _kernels
from sentrybot._kernels import fallback
from sentrybot.detection import (DetectionTensor, GridConfig, decode_grid,
                                 nms, score_candidates)


def make_tensors(rng, count, cfg) -> list[DetectionTensor]:
    tensors = []
    for _ in range(count):
        values = rng.random((cfg.grid_size, cfg.grid_size, cfg.channels),
                            dtype=np.float32)
        # squash confidences so a realistic handful clears the threshold
        for slot in range(cfg.boxes_per_cell):
            values[:, :, slot * 5 + 4] **= 4
        tensors.append(DetectionTensor(values, cfg.grid_size,
                                       cfg.boxes_per_cell, cfg.class_count))
    return tensors


def bench(label, fn, tensors, frames):
    fn(tensors[0])  # warm up
    start = time.perf_counter()
    for k in range(frames):
        fn(tensors[k % len(tensors)])
    elapsed = time.perf_counter() - start
    per_frame_ms = elapsed / frames * 1000.0
    print(f"{label:<28} {per_frame_ms:8.3f} ms/frame   {1000.0 / per_frame_ms:10.0f} fps")
    return per_frame_ms


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--frames", type=int, default=1000)
    parser.add_argument("--grid", type=int, default=13)
    parser.add_argument("--slots", type=int, default=3)
    parser.add_argument("--classes", type=int, default=80)
    args = parser.parse_args(argv)

    names = tuple(f"class{k:02d}" for k in range(args.classes))
    cfg = GridConfig(args.grid, args.slots, names)
    rng = np.random.default_rng(0)
    tensors = make_tensors(rng, min(64, args.frames), cfg)

    def run_kernel(impl):
        def fn(t):
            boxes, scores, ids = impl.decode_score(
                t.values, cfg.grid_size, cfg.boxes_per_cell, cfg.class_count,
                cfg.score_threshold)
            impl.nms_keep(boxes, scores, ids, cfg.nms_iou_threshold)
        return fn

    def staged(t):
        nms(score_candidates(decode_grid(t, cfg), cfg), cfg.nms_iou_threshold)

    print(f"grid {cfg.grid_size}x{cfg.grid_size}, {cfg.boxes_per_cell} boxes/cell, "
          f"{cfg.class_count} classes, {args.frames} frames\n")
    if _kernels.HAVE_NATIVE:
        from sentrybot._kernels import _native

        bench("compiled kernel", run_kernel(_native), tensors, args.frames)
    else:
        print("compiled kernel              (not built)")
    bench("numpy fallback", run_kernel(fallback), tensors, args.frames)
    bench("staged reference", staged, tensors, max(args.frames // 10, 1))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
