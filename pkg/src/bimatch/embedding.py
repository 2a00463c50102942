"""Mask-history embedding: stacked historic masks plus coordinate channels
pushed through four 3x3 convolution + ReLU layers.

The convolution stack operates at feature-grid resolution; masks are
downsampled on entry. Weights are either deterministic seeded stand-ins or
loaded from a weights file (see save_weights / load_weights).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import interchange, kernels
from .errors import InvalidArgumentError, InvalidInputError, ValidationError
from .tensors import CoordChannels, ProbMask, coordinate_grid, downsample_mask

DEFAULT_HIDDEN_WIDTHS = (32, 32, 32)
DEFAULT_POSITION_CHANNELS = 32
_NUM_LAYERS = 4


@dataclass(frozen=True)
class MaskStack:
    """Channel stack of L (bg, fg) mask pairs followed by 3 coordinate planes."""

    planes: np.ndarray
    length: int

    def __post_init__(self) -> None:
        planes = np.ascontiguousarray(self.planes, dtype=np.float32)
        if planes.ndim != 3:
            raise InvalidInputError(f"mask stack must be 3-d, got {planes.shape}")
        if self.length < 1 or planes.shape[0] != 2 * self.length + 3:
            raise InvalidInputError(
                f"stack with length {self.length} must have {2 * self.length + 3} "
                f"channels, got {planes.shape[0]}"
            )
        pair_sum = planes[0 : 2 * self.length : 2] + planes[1 : 2 * self.length : 2]
        if np.abs(pair_sum - 1.0).max() > 1e-6:
            raise InvalidInputError("each (bg, fg) pair must sum to 1 per pixel")
        object.__setattr__(self, "planes", planes)

    @property
    def channels(self) -> int:
        return self.planes.shape[0]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]


@dataclass(frozen=True)
class ConvLayer:
    kernel: np.ndarray  # (out, in, 3, 3)
    bias: np.ndarray  # (out,)

    def __post_init__(self) -> None:
        kernel = np.ascontiguousarray(self.kernel, dtype=np.float32)
        bias = np.ascontiguousarray(self.bias, dtype=np.float32)
        if kernel.ndim != 4 or kernel.shape[2:] != (3, 3):
            raise ValidationError(f"kernel must be (out, in, 3, 3), got {kernel.shape}")
        if bias.shape != (kernel.shape[0],):
            raise ValidationError(
                f"bias shape {bias.shape} does not match {kernel.shape[0]} output channels"
            )
        if not (np.isfinite(kernel).all() and np.isfinite(bias).all()):
            raise ValidationError("convolution weights contain non-finite values")
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "bias", bias)


@dataclass(frozen=True)
class ConvWeights:
    """Four chained convolution layers; in_1 must equal a stack's channel count."""

    layers: tuple[ConvLayer, ...]

    def __post_init__(self) -> None:
        if len(self.layers) != _NUM_LAYERS:
            raise ValidationError(f"expected {_NUM_LAYERS} layers, got {len(self.layers)}")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.kernel.shape[0] != nxt.kernel.shape[1]:
                raise ValidationError(
                    f"layer output {prev.kernel.shape[0]} does not chain into "
                    f"layer input {nxt.kernel.shape[1]}"
                )
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def in_channels(self) -> int:
        return self.layers[0].kernel.shape[1]

    @property
    def out_channels(self) -> int:
        return self.layers[-1].kernel.shape[0]


@dataclass(frozen=True)
class PositionFeatures:
    """Non-negative (post-ReLU) position feature tensor at feature resolution."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 3:
            raise InvalidInputError(f"position features must be 3-d, got {data.shape}")
        if not np.isfinite(data).all():
            raise InvalidInputError("position features contain non-finite values")
        if data.min() < 0.0:
            raise InvalidInputError("position features must be non-negative")
        object.__setattr__(self, "data", data)

    @property
    def channels(self) -> int:
        return self.data.shape[0]


def stack_history(
    history: Sequence[ProbMask], l: int, target_h: int, target_w: int
) -> MaskStack:
    """Stack the most recent l masks oldest-first, then coordinate channels.

    When fewer than l masks exist the oldest available one is replicated to
    fill, keeping the channel count constant from the first frame on.
    """
    if not history:
        raise InvalidArgumentError("mask history is empty")
    if l < 1:
        raise InvalidArgumentError("history length must be >= 1")
    recent = list(history[-l:])
    recent = [recent[0]] * (l - len(recent)) + recent
    planes = []
    for mask in recent:
        if (mask.height, mask.width) != (target_h, target_w):
            mask = downsample_mask(mask, target_h, target_w)
        planes.append(mask.bg)
        planes.append(mask.fg)
    coords: CoordChannels = coordinate_grid(target_h, target_w)
    planes.extend([coords.y_norm, coords.x_norm, coords.center_dist])
    return MaskStack(planes=np.stack(planes).astype(np.float32), length=l)


def init_weights(
    seed: int,
    l: int,
    widths: Sequence[int] = DEFAULT_HIDDEN_WIDTHS,
    c_pos: int = DEFAULT_POSITION_CHANNELS,
) -> ConvWeights:
    """Deterministic pseudo-random weights, uniform in [-a, a] with
    a = sqrt(1 / (in_channels * 9)), fully determined by the seed.

    Draw order is fixed: kernel then bias, layer by layer.
    """
    if len(widths) != _NUM_LAYERS - 1 or any(w < 1 for w in widths):
        raise InvalidArgumentError("widths must be three positive integers")
    if c_pos < 1:
        raise InvalidArgumentError("c_pos must be positive")
    rng = np.random.default_rng(seed)
    chain = [2 * l + 3, *widths, c_pos]
    layers = []
    for cin, cout in zip(chain, chain[1:]):
        bound = np.sqrt(1.0 / (cin * 9))
        kernel = rng.uniform(-bound, bound, size=(cout, cin, 3, 3))
        bias = rng.uniform(-bound, bound, size=cout)
        layers.append(ConvLayer(kernel=kernel, bias=bias))
    return ConvWeights(layers=tuple(layers))


def save_weights(w: ConvWeights, path: str | Path) -> None:
    """Write kernels and biases as consecutive interchange tensor records."""
    with open(path, "wb") as fh:
        for layer in w.layers:
            interchange.write_tensor_record(fh, layer.kernel)
            interchange.write_tensor_record(fh, layer.bias)


def load_weights(path: str | Path, l: int | None = None) -> ConvWeights:
    """Read weights written by save_weights; bit-exact round trip.

    When l is given, the first layer's input channel count is checked
    against 2l + 3.
    """
    records = interchange.read_tensor_records(path)
    if len(records) != 2 * _NUM_LAYERS:
        raise ValidationError(
            f"weights file must hold {2 * _NUM_LAYERS} tensors "
            f"(kernel and bias per layer), got {len(records)}"
        )
    layers = tuple(
        ConvLayer(kernel=records[i], bias=records[i + 1]) for i in range(0, 8, 2)
    )
    weights = ConvWeights(layers=layers)
    if l is not None and weights.in_channels != 2 * l + 3:
        raise ValidationError(
            f"weights expect {weights.in_channels} input channels but history "
            f"length {l} produces {2 * l + 3}"
        )
    return weights


def embed_position_features(stack: MaskStack, w: ConvWeights) -> PositionFeatures:
    """Four successive 3x3 zero-padded convolutions, each followed by ReLU.

    Spatial dimensions are preserved; outputs are non-negative by the ReLU
    contract.
    """
    if stack.channels != w.in_channels:
        raise InvalidArgumentError(
            f"stack has {stack.channels} channels but weights expect {w.in_channels}"
        )
    x = stack.planes
    for layer in w.layers:
        x = kernels.conv3x3_relu(x, layer.kernel, layer.bias)
    return PositionFeatures(data=x)
