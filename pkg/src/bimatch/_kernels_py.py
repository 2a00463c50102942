"""Pure-numpy implementations of the hot kernels.

Drop-in fallback for the compiled extension; bimatch.kernels selects one of
the two at import time. Both backends implement identical contracts:

topk_keep_rows  - keep the k largest entries of each row (ties broken toward
                  the lowest column index, exactly k kept) and replace every
                  other entry with that row's minimum.
masked_colmax   - column-wise maximum of s scaled per-row by two weight
                  vectors, products taken in float32.
conv3x3_relu    - one 3x3 same-padding convolution layer followed by ReLU.
"""

from __future__ import annotations

import numpy as np


def topk_keep_rows(s: np.ndarray, k: int) -> np.ndarray:
    rows, cols = s.shape
    if k >= cols:
        return s.copy()
    # Stable argsort of the negated row = descending by value with ties in
    # ascending column order, which is exactly the declared tie rule.
    order = np.argsort(-s, axis=1, kind="stable")
    keep = order[:, :k]
    out = np.broadcast_to(s.min(axis=1)[:, None], s.shape).copy()
    np.put_along_axis(out, keep, np.take_along_axis(s, keep, axis=1), axis=1)
    return out


def masked_colmax(s: np.ndarray, w_bg: np.ndarray, w_fg: np.ndarray):
    y_bg = (s * w_bg[:, None]).max(axis=0)
    y_fg = (s * w_fg[:, None]).max(axis=0)
    return y_bg, y_fg


def conv3x3_relu(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    cin, h, w = x.shape
    padded = np.zeros((cin, h + 2, w + 2), dtype=np.float32)
    padded[:, 1:-1, 1:-1] = x
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(1, 2))
    out = np.tensordot(kernel, windows, axes=[(1, 2, 3), (0, 3, 4)])
    out += bias[:, None, None]
    return np.maximum(out, 0.0, out)
