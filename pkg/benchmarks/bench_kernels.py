#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the three hot kernels in isolation and the full bijective match at
the reference workload (C=512 features on 24x24 reference and query grids,
K=4), single-threaded. Writes benchmarks/report.txt next to this script.

Usage:  python3 benchmarks/bench_kernels.py
"""

from __future__ import annotations

import platform
import time
from pathlib import Path

import numpy as np

from bimatch import FeatureMap, MatchMode, ProbMask, _kernels_py
from bimatch import matching

try:
    from bimatch import _kernels as compiled
except ImportError:
    compiled = None

try:
    from threadpoolctl import threadpool_limits
except ImportError:
    threadpool_limits = None


def best_of(fn, repeats=9):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times) * 1e3


def run():
    rng = np.random.default_rng(0)
    sim = rng.random((576, 576)).astype(np.float32)
    w_bg = rng.random(576).astype(np.float32)
    w_fg = (1.0 - w_bg).astype(np.float32)
    conv_x = rng.standard_normal((9, 24, 24)).astype(np.float32)
    conv_k = rng.standard_normal((32, 9, 3, 3)).astype(np.float32) * 0.1
    conv_b = rng.standard_normal(32).astype(np.float32) * 0.1

    ref = FeatureMap(rng.standard_normal((512, 24, 24)).astype(np.float32))
    qry = FeatureMap(rng.standard_normal((512, 24, 24)).astype(np.float32))
    mask = ProbMask.from_binary(rng.random((24, 24)) > 0.5)
    mode = MatchMode.bijective(4)

    backends = [("python", _kernels_py)]
    if compiled is not None:
        backends.append(("compiled", compiled))

    lines = [
        "kernel benchmark report",
        f"host: {platform.machine()} / {platform.python_version()}",
        f"compiled extension available: {compiled is not None}",
        "workload: sim 576x576 float32, K=4; conv 9->32 channels on 24x24",
        "timings are best-of-9, milliseconds, single BLAS thread",
        "",
    ]
    for name, impl in backends:
        t_topk = best_of(lambda: impl.topk_keep_rows(sim, 4))
        t_colmax = best_of(lambda: impl.masked_colmax(sim, w_bg, w_fg))
        t_conv = best_of(lambda: impl.conv3x3_relu(conv_x, conv_k, conv_b))
        lines.append(
            f"{name:>8}: topk {t_topk:7.3f} ms | masked colmax {t_colmax:7.3f} ms "
            f"| conv3x3 {t_conv:7.3f} ms"
        )

    lines.append("")
    for name, impl in backends:
        matching_kernels_backup = (
            matching.kernels.topk_keep_rows,
            matching.kernels.masked_colmax,
        )
        matching.kernels.topk_keep_rows = impl.topk_keep_rows
        matching.kernels.masked_colmax = impl.masked_colmax
        try:
            match_ms = best_of(lambda: matching.match(ref, qry, mask, mode), repeats=5)
        finally:
            (matching.kernels.topk_keep_rows,
             matching.kernels.masked_colmax) = matching_kernels_backup
        lines.append(
            f"end-to-end bijective match (C=512, 24x24 grids, K=4), {name} kernels: "
            f"{match_ms:.1f} ms"
        )
        if name == ("compiled" if compiled is not None else "python"):
            verdict = "PASS" if match_ms < 150.0 else "above informational bound"
            lines.append(
                f"reference throughput criterion (150 ms informational): "
                f"{match_ms:.1f} ms -> {verdict}"
            )

    text = "\n".join(lines) + "\n"
    print(text)
    out = Path(__file__).parent / "report.txt"
    out.write_text(text)
    print(f"wrote {out}")


if __name__ == "__main__":
    if threadpool_limits is not None:
        with threadpool_limits(limits=1):
            run()
    else:
        run()
