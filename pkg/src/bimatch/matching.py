"""Reference-to-query similarity construction and its two matching regimes.

Surjective matching reduces the mask-weighted similarity matrix with a
query-wise maximum: every query pixel reads from its best reference pixel,
with no limit on how often a reference pixel is read. The bijective regime
first filters each reference row down to its K strongest query entries;
discarded entries are replaced by the row minimum of the unfiltered row, so
a query pixel can only receive a high score from reference pixels that
selected it among their K best matches. K = infinity reduces to surjective
matching exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, InvalidInputError
from .tensors import NORM_EPS, FeatureMap, ProbMask

_SIM_TOL = 1e-6


@dataclass(frozen=True)
class SimMatrix:
    """Similarity scores in [0, 1]; row = reference pixel, column = query pixel."""

    data: np.ndarray
    ref_h: int
    ref_w: int
    query_h: int
    query_w: int

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise InvalidInputError(f"similarity matrix must be 2-d, got {arr.shape}")
        if arr.shape != (self.ref_h * self.ref_w, self.query_h * self.query_w):
            raise InvalidInputError(
                f"matrix shape {arr.shape} does not match grids "
                f"{self.ref_h}x{self.ref_w} -> {self.query_h}x{self.query_w}"
            )
        if not np.isfinite(arr).all():
            raise InvalidInputError("similarity matrix contains non-finite values")
        if arr.min() < -_SIM_TOL or arr.max() > 1.0 + _SIM_TOL:
            raise InvalidInputError("similarity values must lie in [0, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def ref_size(self) -> int:
        return self.data.shape[0]

    @property
    def query_size(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ScoreMapPair:
    """Background and foreground matching scores on the query grid.

    The two maps are independent max-reductions and are not constrained to
    sum to one.
    """

    y_bg: np.ndarray
    y_fg: np.ndarray

    def __post_init__(self) -> None:
        y_bg = np.ascontiguousarray(self.y_bg, dtype=np.float32)
        y_fg = np.ascontiguousarray(self.y_fg, dtype=np.float32)
        if y_bg.ndim != 2 or y_bg.shape != y_fg.shape:
            raise InvalidInputError(
                f"score maps must be matching 2-d arrays, got {y_bg.shape} and {y_fg.shape}"
            )
        for name, plane in (("y_bg", y_bg), ("y_fg", y_fg)):
            if not np.isfinite(plane).all():
                raise InvalidInputError(f"{name} contains non-finite values")
            if plane.min() < -_SIM_TOL or plane.max() > 1.0 + _SIM_TOL:
                raise InvalidInputError(f"{name} values must lie in [0, 1]")
        object.__setattr__(self, "y_bg", y_bg)
        object.__setattr__(self, "y_fg", y_fg)

    @property
    def height(self) -> int:
        return self.y_bg.shape[0]

    @property
    def width(self) -> int:
        return self.y_bg.shape[1]


@dataclass(frozen=True)
class MatchMode:
    """Matching regime selector; k may be math.inf for the bijective kind."""

    kind: str
    k: float = math.inf

    def __post_init__(self) -> None:
        if self.kind not in ("surjective", "bijective"):
            raise InvalidArgumentError(f"unknown matching kind {self.kind!r}")
        if self.kind == "bijective":
            _check_k(self.k)

    @classmethod
    def surjective(cls) -> "MatchMode":
        return cls(kind="surjective")

    @classmethod
    def bijective(cls, k: float) -> "MatchMode":
        return cls(kind="bijective", k=k)

    @classmethod
    def from_k(cls, k: float) -> "MatchMode":
        """Bijective mode for finite k, surjective for k = infinity."""
        return cls.surjective() if math.isinf(k) else cls.bijective(k)


def _check_k(k: float) -> int | float:
    if isinstance(k, float) and math.isinf(k) and k > 0:
        return math.inf
    if isinstance(k, bool) or not float(k).is_integer():
        raise InvalidArgumentError(f"k must be a positive integer or infinity, got {k!r}")
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k!r}")
    return int(k)


def unit_pixel_vectors(f: FeatureMap) -> np.ndarray:
    """(C, H*W) float64 matrix of unit-normalized pixel descriptors."""
    x = f.data.reshape(f.channels, -1).astype(np.float64)
    norms = np.sqrt(np.sum(x * x, axis=0))
    out = np.zeros_like(x)
    np.divide(x, norms, out=out, where=norms >= NORM_EPS)
    return out


def similarity_matrix(ref: FeatureMap, qry: FeatureMap) -> SimMatrix:
    """Pairwise cosine similarity mapped linearly onto [0, 1].

    Entry (p, q) is (cos(ref_p, qry_q) + 1) / 2 with zero-norm pixels
    contributing a zero vector, i.e. the neutral score 0.5.
    """
    if ref.channels != qry.channels:
        raise InvalidArgumentError(
            f"channel mismatch: reference has {ref.channels}, query has {qry.channels}"
        )
    cos = unit_pixel_vectors(ref).T @ unit_pixel_vectors(qry)
    sim = ((cos + 1.0) * 0.5).astype(np.float32)
    return SimMatrix(
        sim, ref_h=ref.height, ref_w=ref.width, query_h=qry.height, query_w=qry.width
    )


def topk_filter(s: SimMatrix, k: float) -> SimMatrix:
    """Keep the k best query entries of each reference row.

    Ties at the k-th rank are broken toward the lowest query index so that
    exactly k entries survive. Discarded entries are replaced by the minimum
    of the original, unfiltered row. k >= query_size (and k = infinity)
    returns the input unchanged.
    """
    k = _check_k(k)
    if math.isinf(k) or k >= s.query_size:
        return s
    filtered = kernels.topk_keep_rows(s.data, int(k))
    return SimMatrix(
        filtered, ref_h=s.ref_h, ref_w=s.ref_w, query_h=s.query_h, query_w=s.query_w
    )


def mask_weighted_scores(s: SimMatrix, m_ref: ProbMask) -> tuple[SimMatrix, SimMatrix]:
    """Scale every reference row by that pixel's background / foreground mass."""
    if (m_ref.height, m_ref.width) != (s.ref_h, s.ref_w):
        raise InvalidArgumentError(
            f"mask {m_ref.height}x{m_ref.width} does not match reference grid "
            f"{s.ref_h}x{s.ref_w}"
        )
    w_bg = m_ref.bg.reshape(-1).astype(np.float32)
    w_fg = m_ref.fg.reshape(-1).astype(np.float32)
    dims = dict(ref_h=s.ref_h, ref_w=s.ref_w, query_h=s.query_h, query_w=s.query_w)
    return (
        SimMatrix(s.data * w_bg[:, None], **dims),
        SimMatrix(s.data * w_fg[:, None], **dims),
    )


def reduce_query_max(s_bg: SimMatrix, s_fg: SimMatrix) -> ScoreMapPair:
    """Query-wise maximum over reference pixels, reshaped to the query grid."""
    if s_bg.data.shape != s_fg.data.shape or (s_bg.query_h, s_bg.query_w) != (
        s_fg.query_h,
        s_fg.query_w,
    ):
        raise InvalidArgumentError("background and foreground matrices must match in shape")
    shape = (s_bg.query_h, s_bg.query_w)
    return ScoreMapPair(
        y_bg=s_bg.data.max(axis=0).reshape(shape),
        y_fg=s_fg.data.max(axis=0).reshape(shape),
    )


def match(ref: FeatureMap, qry: FeatureMap, m_ref: ProbMask, mode: MatchMode) -> ScoreMapPair:
    """Full matching pass: similarity, optional top-K filter, mask weighting,
    query-wise maximum.

    The top-K filter is applied to the raw similarity matrix before mask
    weighting, so both classes share one connectivity structure.
    """
    s = similarity_matrix(ref, qry)
    if mode.kind == "bijective":
        s = topk_filter(s, mode.k)
    if (m_ref.height, m_ref.width) != (s.ref_h, s.ref_w):
        raise InvalidArgumentError(
            f"mask {m_ref.height}x{m_ref.width} does not match reference grid "
            f"{s.ref_h}x{s.ref_w}"
        )
    w_bg = m_ref.bg.reshape(-1).astype(np.float32)
    w_fg = m_ref.fg.reshape(-1).astype(np.float32)
    y_bg, y_fg = kernels.masked_colmax(s.data, w_bg, w_fg)
    shape = (s.query_h, s.query_w)
    return ScoreMapPair(y_bg=y_bg.reshape(shape), y_fg=y_fg.reshape(shape))
