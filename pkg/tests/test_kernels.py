"""Cross-backend checks: the compiled extension must agree with the numpy
fallback bit-for-bit on the selection kernels and within float tolerance on
the convolution."""

import numpy as np
import pytest

from bimatch import _kernels_py, kernels

try:
    from bimatch import _kernels as compiled
except ImportError:
    compiled = None

needs_compiled = pytest.mark.skipif(
    compiled is None, reason="compiled extension not built"
)


def test_backend_selection_reports():
    assert kernels.backend_name() in ("compiled", "python")
    assert isinstance(kernels.HAS_COMPILED, bool)


@needs_compiled
class TestCompiledAgreesWithPython:
    def test_topk_bitwise(self, rng):
        for _ in range(20):
            rows = int(rng.integers(1, 12))
            cols = int(rng.integers(1, 12))
            s = rng.random((rows, cols)).astype(np.float32)
            for k in (1, 2, 3, cols // 2 + 1):
                a = _kernels_py.topk_keep_rows(s, k)
                b = compiled.topk_keep_rows(s, k)
                assert np.array_equal(a, b)

    def test_topk_with_ties_bitwise(self):
        s = np.array(
            [[0.5, 0.5, 0.5, 0.5], [0.2, 0.8, 0.8, 0.2], [0.9, 0.1, 0.9, 0.1]],
            dtype=np.float32,
        )
        for k in (1, 2, 3, 4):
            assert np.array_equal(
                _kernels_py.topk_keep_rows(s, k), compiled.topk_keep_rows(s, k)
            )

    def test_masked_colmax_bitwise(self, rng):
        for _ in range(20):
            rows = int(rng.integers(1, 14))
            cols = int(rng.integers(1, 14))
            s = rng.random((rows, cols)).astype(np.float32)
            w_bg = rng.random(rows).astype(np.float32)
            w_fg = (1.0 - w_bg).astype(np.float32)
            a_bg, a_fg = _kernels_py.masked_colmax(s, w_bg, w_fg)
            b_bg, b_fg = compiled.masked_colmax(s, w_bg, w_fg)
            assert np.array_equal(a_bg, b_bg)
            assert np.array_equal(a_fg, b_fg)

    def test_conv_close(self, rng):
        x = rng.standard_normal((5, 7, 6)).astype(np.float32)
        kernel = rng.standard_normal((4, 5, 3, 3)).astype(np.float32) * 0.2
        bias = rng.standard_normal(4).astype(np.float32) * 0.1
        a = _kernels_py.conv3x3_relu(x, kernel, bias)
        b = compiled.conv3x3_relu(x, kernel, bias)
        assert np.abs(a - b).max() < 1e-5


def test_pure_env_var_forces_python_backend(tmp_path):
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c",
         "from bimatch import kernels; print(kernels.backend_name())"],
        capture_output=True, text=True, env={"PATH": "/usr/bin:/bin", "BIMATCH_PURE": "1"},
    )
    assert out.stdout.strip() == "python"
