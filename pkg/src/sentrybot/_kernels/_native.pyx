# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled post-processing kernels; see fallback.py for the reference
semantics. All arithmetic is double precision over widened float32 input
so results match the numpy path bit for bit."""

import numpy as np


def decode_score(values, int grid, int slots, int classes, double threshold):
    """Fused grid decode + class scoring. Mirrors fallback.decode_score."""
    cdef const float[:, :, ::1] v = np.ascontiguousarray(values, dtype=np.float32)
    cdef int stride = slots * 5 + classes
    cdef int cap = grid * grid * slots
    boxes_arr = np.empty((cap, 4), dtype=np.float64)
    scores_arr = np.empty(cap, dtype=np.float64)
    ids_arr = np.empty(cap, dtype=np.int32)
    cdef double[:, ::1] boxes = boxes_arr
    cdef double[::1] scores = scores_arr
    cdef int[::1] ids = ids_arr

    cdef int i, j, b, k, base, best_k, n = 0
    cdef double x, y, w, h, conf, s, best, cx, cy, lo_x, lo_y, hi_x, hi_y

    for i in range(grid):
        for j in range(grid):
            for b in range(slots):
                base = b * 5
                x = <double> v[i, j, base]
                y = <double> v[i, j, base + 1]
                w = <double> v[i, j, base + 2]
                h = <double> v[i, j, base + 3]
                conf = <double> v[i, j, base + 4]

                best = -1.0
                best_k = 0
                for k in range(classes):
                    s = conf * (<double> v[i, j, slots * 5 + k])
                    if s > best:
                        best = s
                        best_k = k
                if best < threshold:
                    continue

                cx = (j + x) / grid
                cy = (i + y) / grid
                lo_x = cx - w / 2.0
                lo_y = cy - h / 2.0
                hi_x = cx + w / 2.0
                hi_y = cy + h / 2.0
                boxes[n, 0] = 0.0 if lo_x < 0.0 else (1.0 if lo_x > 1.0 else lo_x)
                boxes[n, 1] = 0.0 if lo_y < 0.0 else (1.0 if lo_y > 1.0 else lo_y)
                boxes[n, 2] = 0.0 if hi_x < 0.0 else (1.0 if hi_x > 1.0 else hi_x)
                boxes[n, 3] = 0.0 if hi_y < 0.0 else (1.0 if hi_y > 1.0 else hi_y)
                scores[n] = best
                ids[n] = best_k
                n += 1

    return boxes_arr[:n].copy(), scores_arr[:n].copy(), ids_arr[:n].copy()


cdef inline double _iou(const double[:, ::1] boxes, int a, int b) nogil:
    cdef double ix, iy, inter, union_
    ix = (boxes[a, 2] if boxes[a, 2] < boxes[b, 2] else boxes[b, 2]) - \
         (boxes[a, 0] if boxes[a, 0] > boxes[b, 0] else boxes[b, 0])
    iy = (boxes[a, 3] if boxes[a, 3] < boxes[b, 3] else boxes[b, 3]) - \
         (boxes[a, 1] if boxes[a, 1] > boxes[b, 1] else boxes[b, 1])
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union_ = (boxes[a, 2] - boxes[a, 0]) * (boxes[a, 3] - boxes[a, 1]) + \
             (boxes[b, 2] - boxes[b, 0]) * (boxes[b, 3] - boxes[b, 1]) - inter
    if union_ <= 0.0:
        return 0.0
    return inter / union_


def nms_keep(boxes, scores, class_ids, double iou_threshold):
    """Greedy class-aware suppression. Mirrors fallback.nms_keep."""
    cdef const double[:, ::1] bx = np.ascontiguousarray(boxes, dtype=np.float64)
    cdef const double[::1] sc = np.ascontiguousarray(scores, dtype=np.float64)
    cdef const int[::1] cid = np.ascontiguousarray(class_ids, dtype=np.int32)
    cdef int n = sc.shape[0]

    # Stable sort on (-score, class_id, index): same order as the fallback.
    order_arr = np.lexsort((np.arange(n), np.asarray(class_ids, dtype=np.int64),
                            -np.asarray(scores, dtype=np.float64)))
    cdef long[::1] order = np.ascontiguousarray(order_arr, dtype=np.int64)

    kept_arr = np.empty(n, dtype=np.int32)
    cdef int[::1] kept = kept_arr
    cdef int m = 0
    cdef int idx, j
    cdef bint ok

    for i in range(n):
        idx = <int> order[i]
        ok = True
        for j in range(m):
            if cid[kept[j]] == cid[idx] and _iou(bx, kept[j], idx) > iou_threshold:
                ok = False
                break
        if ok:
            kept[m] = idx
            m += 1

    return kept_arr[:m].copy()
