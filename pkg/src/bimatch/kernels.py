"""Kernel backend selection: compiled extension when built, numpy otherwise.

Selection is per kernel, driven by benchmarks/bench_kernels.py: the row-wise
top-K filter dominates the matching hot path and the compiled partial
selection beats numpy's full argsort by an order of magnitude, so it comes
from the extension whenever available. The masked column maximum and the
3x3 convolution are faster through vectorized numpy (the convolution lowers
to a BLAS matmul), so those stay on the numpy path even when the extension
is built; the compiled variants remain available for benchmarking.

Set BIMATCH_PURE=1 in the environment to force the numpy fallback for
everything.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:
    _compiled = None

HAS_COMPILED = _compiled is not None

_use_compiled = _compiled is not None and not os.environ.get("BIMATCH_PURE")


def backend_name() -> str:
    return "compiled" if _use_compiled else "python"


if _use_compiled:
    topk_keep_rows = _compiled.topk_keep_rows
else:
    topk_keep_rows = _kernels_py.topk_keep_rows

masked_colmax = _kernels_py.masked_colmax
conv3x3_relu = _kernels_py.conv3x3_relu
