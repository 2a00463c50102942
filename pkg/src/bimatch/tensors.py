"""Core numeric primitives shared by the matching and pipeline stages.

Feature tensors are (C, H, W) float32 arrays in channel-major layout.
Probability masks carry a background and a foreground plane that sum to one
per pixel. All operations here are pure functions over immutable inputs and
are safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidInputError

# Pixels whose descriptor norm falls below this are treated as zero vectors;
# normalizing them yields the zero vector instead of NaN.
NORM_EPS = 1e-12

PROB_SUM_TOL = 1e-6
_VALUE_TOL = 1e-9


@dataclass(frozen=True)
class FeatureMap:
    """Per-pixel descriptor tensor with channel-major (C, H, W) layout."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise InvalidInputError(f"feature map must be (C, H, W), got shape {arr.shape}")
        if 0 in arr.shape:
            raise InvalidInputError(f"feature map dimensions must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise InvalidInputError("feature map contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def pixels(self) -> int:
        return self.data.shape[1] * self.data.shape[2]


@dataclass(frozen=True)
class ProbMask:
    """Two-plane soft mask: background and foreground probabilities per pixel."""

    bg: np.ndarray
    fg: np.ndarray

    def __post_init__(self) -> None:
        bg = np.ascontiguousarray(self.bg, dtype=np.float64)
        fg = np.ascontiguousarray(self.fg, dtype=np.float64)
        if bg.ndim != 2 or bg.shape != fg.shape:
            raise InvalidInputError(
                f"mask planes must be matching 2-d arrays, got {bg.shape} and {fg.shape}"
            )
        if 0 in bg.shape:
            raise InvalidInputError(f"mask dimensions must be positive, got {bg.shape}")
        for name, plane in (("bg", bg), ("fg", fg)):
            if not np.isfinite(plane).all():
                raise InvalidInputError(f"{name} plane contains non-finite values")
            if plane.min() < -_VALUE_TOL or plane.max() > 1.0 + _VALUE_TOL:
                raise InvalidInputError(f"{name} plane has values outside [0, 1]")
        if np.abs(bg + fg - 1.0).max() > PROB_SUM_TOL:
            raise InvalidInputError("bg + fg must equal 1 at every pixel")
        object.__setattr__(self, "bg", bg)
        object.__setattr__(self, "fg", fg)

    @property
    def height(self) -> int:
        return self.bg.shape[0]

    @property
    def width(self) -> int:
        return self.bg.shape[1]

    @classmethod
    def from_fg(cls, fg: np.ndarray) -> "ProbMask":
        fg = np.asarray(fg, dtype=np.float64)
        return cls(bg=1.0 - fg, fg=fg)

    @classmethod
    def from_binary(cls, mask: np.ndarray) -> "ProbMask":
        """Hard mask from a boolean (or 0/1) array."""
        return cls.from_fg(np.asarray(mask, dtype=bool).astype(np.float64))


@dataclass(frozen=True)
class LabelMask:
    """Hard per-pixel assignment: 0 is background, k is object index k."""

    labels: np.ndarray
    num_objects: int

    def __post_init__(self) -> None:
        labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if labels.ndim != 2 or 0 in labels.shape:
            raise InvalidInputError(f"labels must be a non-empty 2-d array, got {labels.shape}")
        if labels.min() < 0:
            raise InvalidInputError("labels must be non-negative")
        if self.num_objects < 0 or labels.max() > self.num_objects:
            raise InvalidInputError(
                f"labels exceed the declared object count {self.num_objects}"
            )
        object.__setattr__(self, "labels", labels)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def object_mask(self, index: int) -> np.ndarray:
        return self.labels == index


@dataclass(frozen=True)
class CoordChannels:
    """Normalized row/column coordinates plus distance from the grid center."""

    y_norm: np.ndarray
    x_norm: np.ndarray
    center_dist: np.ndarray

    @property
    def height(self) -> int:
        return self.y_norm.shape[0]

    @property
    def width(self) -> int:
        return self.y_norm.shape[1]


def normalize_channels(f: FeatureMap) -> FeatureMap:
    """Scale every pixel's channel vector to unit L2 norm.

    Vectors with norm below NORM_EPS map to the zero vector, which makes the
    downstream similarity evaluate to the neutral value 0.5 there.
    """
    x = f.data.astype(np.float64)
    norms = np.sqrt(np.sum(x * x, axis=0))
    safe = np.where(norms < NORM_EPS, 1.0, norms)
    out = np.where(norms < NORM_EPS, 0.0, x / safe)
    return FeatureMap(out.astype(np.float32))


def _area_weights(src: int, dst: int) -> np.ndarray:
    """Row-stochastic matrix averaging src cells into dst cells by overlap."""
    if dst > src:
        raise InvalidArgumentError(f"target length {dst} exceeds source length {src}")
    weights = np.zeros((dst, src), dtype=np.float64)
    scale = src / dst
    for i in range(dst):
        lo = i * scale
        hi = (i + 1) * scale
        j0 = int(np.floor(lo))
        j1 = min(int(np.ceil(hi)), src)
        for j in range(j0, j1):
            weights[i, j] = min(hi, j + 1) - max(lo, j)
    return weights / scale


def downsample_mask(m: ProbMask, target_h: int, target_w: int) -> ProbMask:
    """Area-average pooling of both planes onto a coarser grid.

    Each output cell is the mean of the source area it covers, so probability
    mass is preserved (no aliasing of thin structures).
    """
    if target_h < 1 or target_w < 1:
        raise InvalidArgumentError("target dimensions must be positive")
    if target_h > m.height or target_w > m.width:
        raise InvalidArgumentError(
            f"target {target_h}x{target_w} exceeds source {m.height}x{m.width}"
        )
    wh = _area_weights(m.height, target_h)
    ww = _area_weights(m.width, target_w)
    bg = wh @ m.bg @ ww.T
    fg = wh @ m.fg @ ww.T
    return ProbMask(bg=bg, fg=fg)


def coordinate_grid(h: int, w: int) -> CoordChannels:
    """Coordinate channels in [-1, 1] plus center distance scaled to [0, 1].

    Degenerate 1-pixel axes map to coordinate 0 (the center), matching the
    limit of the (2r/(n-1) - 1) formula.
    """
    if h < 1 or w < 1:
        raise InvalidArgumentError("grid dimensions must be positive")
    y = np.zeros(h) if h == 1 else 2.0 * np.arange(h) / (h - 1) - 1.0
    x = np.zeros(w) if w == 1 else 2.0 * np.arange(w) / (w - 1) - 1.0
    y_norm = np.repeat(y[:, None], w, axis=1)
    x_norm = np.repeat(x[None, :], h, axis=0)
    center_dist = np.sqrt(y_norm**2 + x_norm**2) / np.sqrt(2.0)
    return CoordChannels(y_norm=y_norm, x_norm=x_norm, center_dist=center_dist)


def _bilinear_weights(src: int, dst: int) -> np.ndarray:
    """Corner-aligned linear interpolation weights from src to dst samples."""
    weights = np.zeros((dst, src), dtype=np.float64)
    if src == 1:
        weights[:, 0] = 1.0
        return weights
    if dst == 1:
        # Only reachable when src == 1 under the upsampling precondition,
        # handled above; kept for standalone use of the helper.
        weights[0, 0] = 1.0
        return weights
    pos = np.arange(dst) * (src - 1) / (dst - 1)
    lower = np.minimum(pos.astype(np.int64), src - 2)
    frac = pos - lower
    weights[np.arange(dst), lower] = 1.0 - frac
    weights[np.arange(dst), lower + 1] = frac
    return weights


def bilinear_resize(plane: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Corner-aligned bilinear interpolation of a single 2-d plane."""
    plane = np.asarray(plane, dtype=np.float64)
    wh = _bilinear_weights(plane.shape[0], target_h)
    ww = _bilinear_weights(plane.shape[1], target_w)
    return wh @ plane @ ww.T


def upsample_probmask(m: ProbMask, target_h: int, target_w: int) -> ProbMask:
    """Bilinear upsampling of both planes, renormalized so bg + fg == 1."""
    if target_h < m.height or target_w < m.width:
        raise InvalidArgumentError(
            f"target {target_h}x{target_w} is smaller than source {m.height}x{m.width}"
        )
    bg = bilinear_resize(m.bg, target_h, target_w)
    fg = bilinear_resize(m.fg, target_h, target_w)
    total = bg + fg
    return ProbMask(bg=bg / total, fg=fg / total)


def block_upsample(arr: np.ndarray, factor: int) -> np.ndarray:
    """Nearest-neighbor upscaling by an integer factor."""
    return np.repeat(np.repeat(arr, factor, axis=0), factor, axis=1)
