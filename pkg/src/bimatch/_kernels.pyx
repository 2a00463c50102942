# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: row-wise top-K filtering, fused mask-weighted column
maxima, and the 3x3 convolution layer.

Contracts are identical to bimatch._kernels_py; topk_keep_rows and
masked_colmax are bit-compatible with the numpy fallback (same float32
products, same tie rule), conv3x3_relu agrees within normal float tolerance.
"""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc

cnp.import_array()


def topk_keep_rows(s, int k):
    """Keep the k largest entries per row (ties toward the lowest column,
    exactly k kept); replace the rest with the row minimum.

    Partial selection: one sweep per row maintains the k largest values in
    a sorted buffer (O(cols * k)) together with the row minimum, then a
    second sweep writes survivors and replacements.
    """
    cdef cnp.ndarray[cnp.float32_t, ndim=2, mode="c"] src = \
        np.ascontiguousarray(s, dtype=np.float32)
    cdef Py_ssize_t rows = src.shape[0]
    cdef Py_ssize_t cols = src.shape[1]
    if k >= cols:
        return src.copy()
    cdef cnp.ndarray[cnp.float32_t, ndim=2, mode="c"] out = \
        np.empty((rows, cols), dtype=np.float32)
    cdef float* best = <float*> malloc(k * sizeof(float))
    if best == NULL:
        raise MemoryError()
    cdef Py_ssize_t p, q, i, j
    cdef float threshold, row_min, value
    cdef Py_ssize_t filled, count_gt, quota
    try:
        with nogil:
            for p in range(rows):
                row_min = src[p, 0]
                filled = 0
                for q in range(cols):
                    value = src[p, q]
                    if value < row_min:
                        row_min = value
                    if filled < k:
                        # insertion keeping `best` sorted descending
                        i = filled
                        while i > 0 and best[i - 1] < value:
                            best[i] = best[i - 1]
                            i -= 1
                        best[i] = value
                        filled += 1
                    elif value > best[k - 1]:
                        i = k - 1
                        while i > 0 and best[i - 1] < value:
                            best[i] = best[i - 1]
                            i -= 1
                        best[i] = value
                threshold = best[k - 1]
                count_gt = 0
                for q in range(cols):
                    if src[p, q] > threshold:
                        count_gt += 1
                # Entries strictly above the threshold always survive; ties at
                # the threshold fill the remaining quota left to right.
                quota = k - count_gt
                for q in range(cols):
                    value = src[p, q]
                    if value > threshold:
                        out[p, q] = value
                    elif value == threshold and quota > 0:
                        out[p, q] = value
                        quota -= 1
                    else:
                        out[p, q] = row_min
    finally:
        free(best)
    return out


def masked_colmax(s, w_bg, w_fg):
    """Column-wise maxima of s with rows scaled by w_bg / w_fg (float32)."""
    cdef cnp.ndarray[cnp.float32_t, ndim=2, mode="c"] sv = \
        np.ascontiguousarray(s, dtype=np.float32)
    cdef cnp.ndarray[cnp.float32_t, ndim=1, mode="c"] bg = \
        np.ascontiguousarray(w_bg, dtype=np.float32)
    cdef cnp.ndarray[cnp.float32_t, ndim=1, mode="c"] fg = \
        np.ascontiguousarray(w_fg, dtype=np.float32)
    cdef Py_ssize_t rows = sv.shape[0]
    cdef Py_ssize_t cols = sv.shape[1]
    cdef cnp.ndarray[cnp.float32_t, ndim=1, mode="c"] y_bg = \
        np.empty(cols, dtype=np.float32)
    cdef cnp.ndarray[cnp.float32_t, ndim=1, mode="c"] y_fg = \
        np.empty(cols, dtype=np.float32)
    cdef Py_ssize_t p, q
    cdef float wb, wf, prod
    with nogil:
        wb = bg[0]
        wf = fg[0]
        for q in range(cols):
            y_bg[q] = sv[0, q] * wb
            y_fg[q] = sv[0, q] * wf
        for p in range(1, rows):
            wb = bg[p]
            wf = fg[p]
            for q in range(cols):
                prod = sv[p, q] * wb
                if prod > y_bg[q]:
                    y_bg[q] = prod
                prod = sv[p, q] * wf
                if prod > y_fg[q]:
                    y_fg[q] = prod
    return y_bg, y_fg


def conv3x3_relu(x, kernel, bias):
    """One 3x3 same-padding convolution layer followed by ReLU."""
    cdef cnp.ndarray[cnp.float32_t, ndim=3, mode="c"] xv = \
        np.ascontiguousarray(x, dtype=np.float32)
    cdef cnp.ndarray[cnp.float32_t, ndim=4, mode="c"] kv = \
        np.ascontiguousarray(kernel, dtype=np.float32)
    cdef cnp.ndarray[cnp.float32_t, ndim=1, mode="c"] bv = \
        np.ascontiguousarray(bias, dtype=np.float32)
    cdef Py_ssize_t cin = xv.shape[0]
    cdef Py_ssize_t h = xv.shape[1]
    cdef Py_ssize_t w = xv.shape[2]
    cdef Py_ssize_t cout = kv.shape[0]
    cdef cnp.ndarray[cnp.float32_t, ndim=3, mode="c"] out = \
        np.empty((cout, h, w), dtype=np.float32)
    cdef Py_ssize_t o, c, y, xq, ky, kx, sy, sx
    cdef double acc
    with nogil:
        for o in range(cout):
            for y in range(h):
                for xq in range(w):
                    acc = bv[o]
                    for c in range(cin):
                        for ky in range(3):
                            sy = y + ky - 1
                            if sy < 0 or sy >= h:
                                continue
                            for kx in range(3):
                                sx = xq + kx - 1
                                if sx < 0 or sx >= w:
                                    continue
                                acc += kv[o, c, ky, kx] * xv[c, sy, sx]
                    if acc < 0.0:
                        acc = 0.0
                    out[o, y, xq] = <float> acc
    return out
