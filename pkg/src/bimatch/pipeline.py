"""Per-frame inference: global matching against frame 0, bijective local
matching against frame i-1, mask-history embedding, deterministic fusion
decoding, and soft multi-object aggregation.

The reference set is exactly {frame 0, frame i-1}; there is no growing
memory bank. The learned decoder is replaced by fusion_decode, a fixed
blend of the two matching branches and a blurred previous-mask prior;
position features are still computed every frame and exposed as
diagnostics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .embedding import (
    DEFAULT_HIDDEN_WIDTHS,
    DEFAULT_POSITION_CHANNELS,
    ConvWeights,
    PositionFeatures,
    embed_position_features,
    init_weights,
    load_weights,
    stack_history,
)
from .errors import InvalidArgumentError, StateError, ValidationError
from .interchange import FEATURE_SCALE, SequenceBundle
from .matching import MatchMode, ScoreMapPair, match
from .tensors import (
    FeatureMap,
    LabelMask,
    ProbMask,
    bilinear_resize,
    block_upsample,
    downsample_mask,
    upsample_probmask,
)

# 5x5 binomial blur used as the previous-mask prior, zero-padded at borders.
_BINOMIAL1D = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
BINOMIAL5 = np.outer(_BINOMIAL1D, _BINOMIAL1D)


class ResolutionDecision(enum.Enum):
    NATIVE = "native"
    DOWNSCALE_480 = "downscale-480"


@dataclass(frozen=True)
class PipelineConfig:
    """Inference configuration; defaults reproduce the reference setup
    (global K = infinity, local K = 4, three historic masks)."""

    k_global: float = math.inf
    k_local: float = 4
    history_l: int = 3
    fusion_alpha: float = 0.5
    fusion_beta: float = 0.25
    epsilon: float = 1e-7
    fg_pixel_threshold: int = 1000
    weights_seed: int = 0
    weights_path: str | None = None

    def __post_init__(self) -> None:
        if not math.isinf(self.k_global) and self.k_global < 1:
            raise InvalidArgumentError("k_global must be >= 1 or infinity")
        if not math.isinf(self.k_local) and self.k_local < 1:
            raise InvalidArgumentError("k_local must be >= 1 or infinity")
        if self.history_l < 1:
            raise InvalidArgumentError("history_l must be >= 1")
        if not 0.0 <= self.fusion_alpha <= 1.0:
            raise InvalidArgumentError("fusion_alpha must lie in [0, 1]")
        if not 0.0 <= self.fusion_beta <= 1.0:
            raise InvalidArgumentError("fusion_beta must lie in [0, 1]")
        if self.epsilon <= 0.0:
            raise InvalidArgumentError("epsilon must be positive")
        if self.fg_pixel_threshold < 0:
            raise InvalidArgumentError("fg_pixel_threshold must be non-negative")


@dataclass(frozen=True)
class ObjectDiagnostics:
    global_scores: ScoreMapPair
    local_scores: ScoreMapPair
    position_features: PositionFeatures


@dataclass(frozen=True)
class FramePrediction:
    """Per-object full-resolution masks plus the aggregated hard assignment."""

    masks: tuple[ProbMask, ...]
    label_mask: LabelMask
    background: np.ndarray
    diagnostics: tuple[ObjectDiagnostics, ...] = ()


@dataclass(frozen=True)
class VideoState:
    initial_features: FeatureMap
    initial_masks: tuple[ProbMask, ...]  # feature resolution, one per object
    previous_features: FeatureMap
    histories: tuple[tuple[ProbMask, ...], ...]  # oldest first, per object
    frame_index: int
    full_h: int
    full_w: int


def resolve_weights(cfg: PipelineConfig) -> ConvWeights:
    if cfg.weights_path is not None:
        return load_weights(cfg.weights_path, l=cfg.history_l)
    return init_weights(
        cfg.weights_seed, cfg.history_l, DEFAULT_HIDDEN_WIDTHS, DEFAULT_POSITION_CHANNELS
    )


def blur_binomial(plane: np.ndarray) -> np.ndarray:
    """Fixed 5x5 binomial blur with zero padding outside the image."""
    return ndimage.convolve(
        np.asarray(plane, dtype=np.float64), BINOMIAL5, mode="constant", cval=0.0
    )


def fusion_decode(
    global_scores: ScoreMapPair,
    local_scores: ScoreMapPair,
    prev_mask: ProbMask,
    cfg: PipelineConfig,
) -> ProbMask:
    """Blend matching branches with a blurred previous-mask prior.

    Per class: alpha * global + (1 - alpha) * local + beta * blur(prev).
    The two class scores are then normalized per pixel; where both are
    below epsilon the pixel degenerates to the neutral (0.5, 0.5) split.
    """
    shapes = {
        (global_scores.height, global_scores.width),
        (local_scores.height, local_scores.width),
        (prev_mask.height, prev_mask.width),
    }
    if len(shapes) != 1:
        raise InvalidArgumentError(f"mismatched input resolutions: {sorted(shapes)}")
    alpha, beta = cfg.fusion_alpha, cfg.fusion_beta
    score_bg = (
        alpha * global_scores.y_bg.astype(np.float64)
        + (1.0 - alpha) * local_scores.y_bg.astype(np.float64)
        + beta * blur_binomial(prev_mask.bg)
    )
    score_fg = (
        alpha * global_scores.y_fg.astype(np.float64)
        + (1.0 - alpha) * local_scores.y_fg.astype(np.float64)
        + beta * blur_binomial(prev_mask.fg)
    )
    total = score_bg + score_fg
    tiny = total < cfg.epsilon
    safe = np.where(tiny, 1.0, total)
    bg = np.where(tiny, 0.5, score_bg / safe)
    fg = np.where(tiny, 0.5, score_fg / safe)
    return ProbMask(bg=bg, fg=fg)


@dataclass(frozen=True)
class AggregationResult:
    objects: np.ndarray  # (M, H, W) per-object probabilities
    background: np.ndarray  # (H, W)
    labels: LabelMask


def soft_aggregate(fg_probs, epsilon: float) -> AggregationResult:
    """Odds-based fusion of per-object foreground probabilities.

    Background mass is the product of the per-object complements; every
    class is converted to odds p / max(1 - p, epsilon) and renormalized.
    The label is the per-pixel argmax with ties to the lowest index, so
    background wins full ties.
    """
    maps = [np.asarray(p, dtype=np.float64) for p in fg_probs]
    if not maps:
        raise InvalidArgumentError("no object probability maps given")
    shape = maps[0].shape
    if any(m.shape != shape for m in maps) or len(shape) != 2:
        raise InvalidArgumentError("object maps must share one 2-d shape")
    stacked = np.stack(maps)
    if stacked.min() < 0.0 or stacked.max() > 1.0:
        raise InvalidArgumentError("object probabilities must lie in [0, 1]")
    p_bg = np.prod(1.0 - stacked, axis=0)
    odds_obj = stacked / np.maximum(1.0 - stacked, epsilon)
    odds_bg = p_bg / np.maximum(1.0 - p_bg, epsilon)
    all_odds = np.concatenate([odds_bg[None], odds_obj], axis=0)
    normalized = all_odds / all_odds.sum(axis=0)
    labels = LabelMask(
        labels=np.argmax(normalized, axis=0).astype(np.int32), num_objects=len(maps)
    )
    return AggregationResult(
        objects=normalized[1:], background=normalized[0], labels=labels
    )


def select_working_resolution(
    initial_fg_pixel_count: int, cfg: PipelineConfig
) -> ResolutionDecision:
    """Adaptive-resolution rule: keep the native resolution for small objects
    (fewer foreground pixels than the threshold), otherwise downscale so the
    shorter image side is 480."""
    if initial_fg_pixel_count < 0:
        raise InvalidArgumentError("pixel count must be non-negative")
    if initial_fg_pixel_count < cfg.fg_pixel_threshold:
        return ResolutionDecision.NATIVE
    return ResolutionDecision.DOWNSCALE_480


def init_state(bundle: SequenceBundle, cfg: PipelineConfig) -> VideoState:
    """Build frame-1 state from a bundle's features and initial masks."""
    if bundle.n_objects < 1:
        raise ValidationError("bundle declares no objects")
    initial = FeatureMap(bundle.features[0])
    masks = []
    for obj in range(1, bundle.n_objects + 1):
        gt = bundle.gt_masks.get((0, obj))
        if gt is None:
            raise ValidationError(f"bundle is missing the initial mask for object {obj}")
        full = ProbMask.from_binary(gt)
        masks.append(downsample_mask(full, initial.height, initial.width))
    return VideoState(
        initial_features=initial,
        initial_masks=tuple(masks),
        previous_features=initial,
        histories=tuple((m,) for m in masks),
        frame_index=1,
        full_h=bundle.full_h,
        full_w=bundle.full_w,
    )


def step(
    state: VideoState,
    query_features: FeatureMap,
    cfg: PipelineConfig,
    weights: ConvWeights,
) -> tuple[FramePrediction, VideoState]:
    """Advance one frame: match, embed, decode, aggregate, update state.

    The query feature map is shared across objects; only masks differ per
    object. History entries appended to the new state are the
    post-aggregation per-object masks at feature resolution.
    """
    if state.frame_index < 1:
        raise StateError("state must be initialized with frame_index >= 1")
    feat_h = state.initial_features.height
    feat_w = state.initial_features.width
    global_mode = MatchMode.from_k(cfg.k_global)
    local_mode = MatchMode.from_k(cfg.k_local)

    decoded = []
    diagnostics = []
    for obj in range(len(state.initial_masks)):
        history = state.histories[obj]
        prev_mask = history[-1]
        global_scores = match(
            state.initial_features, query_features, state.initial_masks[obj], global_mode
        )
        local_scores = match(
            state.previous_features, query_features, prev_mask, local_mode
        )
        stack = stack_history(history, cfg.history_l, feat_h, feat_w)
        position = embed_position_features(stack, weights)
        decoded.append(fusion_decode(global_scores, local_scores, prev_mask, cfg))
        diagnostics.append(
            ObjectDiagnostics(
                global_scores=global_scores,
                local_scores=local_scores,
                position_features=position,
            )
        )

    agg = soft_aggregate([d.fg for d in decoded], cfg.epsilon)

    new_histories = tuple(
        (*state.histories[obj], ProbMask.from_fg(agg.objects[obj]))[-cfg.history_l :]
        for obj in range(len(state.initial_masks))
    )
    full_masks = tuple(
        upsample_probmask(ProbMask.from_fg(obj_map), state.full_h, state.full_w)
        for obj_map in agg.objects
    )
    label_full = block_upsample(agg.labels.labels, FEATURE_SCALE)[
        : state.full_h, : state.full_w
    ]
    background_full = bilinear_resize(agg.background, state.full_h, state.full_w)
    prediction = FramePrediction(
        masks=full_masks,
        label_mask=LabelMask(labels=label_full, num_objects=len(full_masks)),
        background=background_full,
        diagnostics=tuple(diagnostics),
    )
    new_state = replace(
        state,
        previous_features=query_features,
        histories=new_histories,
        frame_index=state.frame_index + 1,
    )
    return prediction, new_state


def run_sequence(
    bundle: SequenceBundle,
    cfg: PipelineConfig | None = None,
    weights: ConvWeights | None = None,
) -> list[FramePrediction]:
    """Segment a whole bundle: frame 0 echoes the given ground truth, later
    frames are produced by step. Deterministic given (bundle, cfg)."""
    cfg = cfg or PipelineConfig()
    if bundle.n_frames < 1:
        raise ValidationError("bundle has no frames")
    if bundle.n_objects < 1:
        raise ValidationError("no object mask on frame 0")
    if weights is None:
        weights = resolve_weights(cfg)

    labels0 = bundle.gt_labels(0)
    if labels0 is None:
        raise ValidationError("bundle is missing initial masks for some objects")
    initial_masks = tuple(
        ProbMask.from_binary(bundle.gt_masks[(0, obj)])
        for obj in range(1, bundle.n_objects + 1)
    )
    first = FramePrediction(
        masks=initial_masks,
        label_mask=LabelMask(labels=labels0, num_objects=bundle.n_objects),
        background=(labels0 == 0).astype(np.float64),
        diagnostics=(),
    )
    predictions = [first]
    state = init_state(bundle, cfg)
    for t in range(1, bundle.n_frames):
        prediction, state = step(state, FeatureMap(bundle.features[t]), cfg, weights)
        predictions.append(prediction)
    return predictions
