"""Deterministic synthetic video bundles with analytically known ground truth.

Every scene region (object, distractor, background cell) owns a base
descriptor. Object and own-appearance distractor descriptors are mutually
orthonormal. Background cell descriptors are unit vectors whose components
along every object descriptor are reflected to be non-positive: background
never resembles a target (cosine <= 0), and a spread of genuinely
dissimilar background keeps row minima low, the way real scenes contain
content far from the target appearance. A distractor flagged
same_appearance shares the first object's base descriptor exactly.

On top of the base descriptor every pixel carries a persistent Gaussian
perturbation that travels with its region across frames: the same physical
point keeps the same descriptor for the whole sequence, which is what makes
temporal self-matching meaningful on these scenes. With noise_sigma = 0 a
same-appearance distractor is pixel-for-pixel identical to the target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ValidationError
from .interchange import FEATURE_SCALE, SequenceBundle, parse_structured
from .tensors import block_upsample


@dataclass(frozen=True)
class ObjectSpec:
    start: tuple[int, int]
    size: tuple[int, int] = (2, 2)
    shape: str = "rect"  # "rect" | "disk"
    velocity: tuple[int, int] = (0, 0)  # cells per frame (dy, dx)


@dataclass(frozen=True)
class DistractorSpec:
    offset: tuple[int, int]  # placement relative to the first object's start
    size: tuple[int, int] = (2, 2)
    shape: str = "rect"
    same_appearance: bool = True
    appear_frame: int = 0  # first frame the distractor is visible
    # 0 = stays visible; p >= 1 alternates p visible / p hidden frames,
    # modeling intermittent look-alikes (shimmer, passing objects).
    blink_period: int = 0

    def visible(self, frame: int) -> bool:
        if frame < self.appear_frame:
            return False
        if self.blink_period == 0:
            return True
        return (frame - self.appear_frame) % (2 * self.blink_period) < self.blink_period


@dataclass(frozen=True)
class SceneConfig:
    frames: int
    height: int  # feature-grid cells; full resolution is 16x this
    width: int
    channels: int
    objects: tuple[ObjectSpec, ...]
    distractors: tuple[DistractorSpec, ...] = ()
    noise_sigma: float = 0.0
    texture_tile: int = 1  # background cells per texture tile edge
    seed: int = 0


def _shape_cells(shape: str, size: tuple[int, int]) -> np.ndarray:
    sh, sw = size
    if shape == "rect":
        return np.ones((sh, sw), dtype=bool)
    if shape == "disk":
        y = (np.arange(sh)[:, None] + 0.5) / sh * 2.0 - 1.0
        x = (np.arange(sw)[None, :] + 0.5) / sw * 2.0 - 1.0
        return y * y + x * x <= 1.0
    raise ConfigError(f"unknown shape {shape!r}")


def _clamp_position(start: tuple[int, int], size: tuple[int, int],
                    grid: tuple[int, int]) -> tuple[int, int]:
    return (
        int(np.clip(start[0], 0, grid[0] - size[0])),
        int(np.clip(start[1], 0, grid[1] - size[1])),
    )


def object_position(cfg: SceneConfig, obj_index: int, frame: int) -> tuple[int, int]:
    """Top-left cell of an object's bounding box at a frame, clamped in bounds."""
    spec = cfg.objects[obj_index]
    raw = (
        spec.start[0] + frame * spec.velocity[0],
        spec.start[1] + frame * spec.velocity[1],
    )
    return _clamp_position(raw, spec.size, (cfg.height, cfg.width))


def distractor_position(cfg: SceneConfig, idx: int) -> tuple[int, int]:
    spec = cfg.distractors[idx]
    anchor = cfg.objects[0].start
    raw = (anchor[0] + spec.offset[0], anchor[1] + spec.offset[1])
    return _clamp_position(raw, spec.size, (cfg.height, cfg.width))


def _validate(cfg: SceneConfig) -> None:
    if cfg.frames < 1:
        raise ConfigError("scene must have at least one frame")
    if cfg.height < 1 or cfg.width < 1 or cfg.channels < 1:
        raise ConfigError("grid dimensions and channels must be positive")
    if not cfg.objects:
        raise ConfigError("scene must declare at least one object")
    if cfg.texture_tile < 1:
        raise ConfigError("texture_tile must be >= 1")
    if cfg.noise_sigma < 0:
        raise ConfigError("noise_sigma must be non-negative")
    for spec in cfg.objects:
        if spec.size[0] > cfg.height or spec.size[1] > cfg.width:
            raise ConfigError(f"object of size {spec.size} does not fit the grid")
        _shape_cells(spec.shape, spec.size)
    for spec in cfg.distractors:
        if spec.size[0] > cfg.height or spec.size[1] > cfg.width:
            raise ConfigError(f"distractor of size {spec.size} does not fit the grid")
        if spec.appear_frame < 0:
            raise ConfigError("appear_frame must be non-negative")
        if spec.blink_period < 0:
            raise ConfigError("blink_period must be non-negative")
        _shape_cells(spec.shape, spec.size)
    n_basis = len(cfg.objects) + sum(1 for d in cfg.distractors if not d.same_appearance)
    if n_basis > cfg.channels:
        raise ConfigError(
            f"channels ({cfg.channels}) too small for {n_basis} distinct region descriptors"
        )


def generate_scene(cfg: SceneConfig) -> SequenceBundle:
    """Render a scene into an in-memory bundle, fully determined by the seed.

    Draw order is fixed: region base descriptors, background cell
    descriptors (tile row-major), background pixel noise, then per-object
    and per-distractor local noise in declaration order.
    """
    _validate(cfg)
    rng = np.random.default_rng(cfg.seed)
    h, w, c = cfg.height, cfg.width, cfg.channels

    n_obj = len(cfg.objects)
    own_indices = [i for i, d in enumerate(cfg.distractors) if not d.same_appearance]
    n_basis = n_obj + len(own_indices)
    basis, _ = np.linalg.qr(rng.standard_normal((c, n_basis)))
    obj_desc = [basis[:, i] for i in range(n_obj)]
    distr_desc = []
    next_own = n_obj
    for d in cfg.distractors:
        if d.same_appearance:
            distr_desc.append(obj_desc[0])
        else:
            distr_desc.append(basis[:, next_own])
            next_own += 1

    tiles_h = -(-h // cfg.texture_tile)
    tiles_w = -(-w // cfg.texture_tile)
    tile_desc = np.empty((tiles_h, tiles_w, c))
    for ty in range(tiles_h):
        for tx in range(tiles_w):
            vec = rng.standard_normal(c)
            # Reflect components along every region descriptor so background
            # cosine against any object is non-positive.
            coeff = basis.T @ vec
            vec -= basis @ (coeff + np.abs(coeff))
            norm = np.linalg.norm(vec)
            if norm < 1e-9:
                raise ConfigError("degenerate background descriptor; increase channels")
            tile_desc[ty, tx] = vec / norm

    bg_noise = rng.standard_normal((c, h, w)) * cfg.noise_sigma
    obj_noise = [
        rng.standard_normal((c, spec.size[0], spec.size[1])) * cfg.noise_sigma
        for spec in cfg.objects
    ]
    distr_noise = [
        rng.standard_normal((c, spec.size[0], spec.size[1])) * cfg.noise_sigma
        for spec in cfg.distractors
    ]

    cell_y, cell_x = np.mgrid[0:h, 0:w]
    background = tile_desc[cell_y // cfg.texture_tile, cell_x // cfg.texture_tile]
    background = background.transpose(2, 0, 1) + bg_noise

    features = []
    gt_masks: dict[tuple[int, int], np.ndarray] = {}
    for t in range(cfg.frames):
        feat = background.copy()
        for i, spec in enumerate(cfg.distractors):
            if not spec.visible(t):
                continue
            dy, dx = distractor_position(cfg, i)
            cells = _shape_cells(spec.shape, spec.size)
            patch = distr_desc[i][:, None, None] + distr_noise[i]
            region = feat[:, dy : dy + spec.size[0], dx : dx + spec.size[1]]
            region[:, cells] = patch[:, cells]
        labels = np.zeros((h, w), dtype=np.int32)
        for i, spec in enumerate(cfg.objects):
            oy, ox = object_position(cfg, i, t)
            cells = _shape_cells(spec.shape, spec.size)
            patch = obj_desc[i][:, None, None] + obj_noise[i]
            region = feat[:, oy : oy + spec.size[0], ox : ox + spec.size[1]]
            region[:, cells] = patch[:, cells]
            label_region = labels[oy : oy + spec.size[0], ox : ox + spec.size[1]]
            label_region[cells] = i + 1
        features.append(feat.astype(np.float32))
        for i in range(n_obj):
            gt_masks[(t, i + 1)] = block_upsample(labels == i + 1, FEATURE_SCALE)

    return SequenceBundle(
        channels=c,
        feat_h=h,
        feat_w=w,
        full_h=h * FEATURE_SCALE,
        full_w=w * FEATURE_SCALE,
        n_frames=cfg.frames,
        n_objects=n_obj,
        features=tuple(features),
        gt_masks=gt_masks,
    )


# ---------------------------------------------------------------------------
# Scene config files (same structured-text dialect as bundle manifests)
# ---------------------------------------------------------------------------

_SPEC_BOOL = {"true": True, "false": False}


def _parse_pair(text: str, sep: str) -> tuple[int, int]:
    parts = text.split(sep)
    if len(parts) != 2:
        raise ValidationError(f"expected two {sep!r}-separated integers, got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_spec_tokens(line: str) -> dict:
    tokens = {}
    for token in line.split():
        key, _, value = token.partition("=")
        if not value:
            raise ValidationError(f"malformed spec token {token!r}")
        tokens[key] = value
    return tokens


def _object_from_tokens(tokens: dict) -> ObjectSpec:
    if "start" not in tokens:
        raise ValidationError("object spec requires start=Y,X")
    return ObjectSpec(
        start=_parse_pair(tokens["start"], ","),
        size=_parse_pair(tokens.get("size", "2x2"), "x"),
        shape=tokens.get("shape", "rect"),
        velocity=_parse_pair(tokens.get("velocity", "0,0"), ","),
    )


def _distractor_from_tokens(tokens: dict) -> DistractorSpec:
    if "offset" not in tokens:
        raise ValidationError("distractor spec requires offset=Y,X")
    same = tokens.get("same_appearance", "true").lower()
    if same not in _SPEC_BOOL:
        raise ValidationError(f"same_appearance must be true or false, got {same!r}")
    return DistractorSpec(
        offset=_parse_pair(tokens["offset"], ","),
        size=_parse_pair(tokens.get("size", "2x2"), "x"),
        shape=tokens.get("shape", "rect"),
        same_appearance=_SPEC_BOOL[same],
        appear_frame=int(tokens.get("appear_frame", "0")),
        blink_period=int(tokens.get("blink_period", "0")),
    )


def scene_config_from_text(text: str, seed: int | None = None) -> SceneConfig:
    """Parse a scene config document; an explicit seed argument wins over the
    seed key in the document."""
    data = parse_structured(text)
    try:
        objects = tuple(
            _object_from_tokens(_parse_spec_tokens(line))
            for line in data.get("objects", [])
        )
        distractors = tuple(
            _distractor_from_tokens(_parse_spec_tokens(line))
            for line in data.get("distractors", [])
        )
        cfg = SceneConfig(
            frames=int(data["frames"]),
            height=int(data["height"]),
            width=int(data["width"]),
            channels=int(data["channels"]),
            objects=objects,
            distractors=distractors,
            noise_sigma=float(data.get("noise_sigma", 0.0)),
            texture_tile=int(data.get("texture_tile", 1)),
            seed=seed if seed is not None else int(data.get("seed", 0)),
        )
    except KeyError as exc:
        raise ValidationError(f"scene config missing key {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise ValidationError(f"scene config: {exc}") from exc
    return cfg
