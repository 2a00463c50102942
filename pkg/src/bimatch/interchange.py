"""Bit-exact tensor serialization, sequence-bundle layout, mask image I/O,
and score-map rendering.

Tensor file layout (one record; files may concatenate several):

    magic   4 bytes  "BMT1"
    dtype   u8       1 = 32-bit little-endian float, 2 = unsigned 8-bit
    ndim    u8
    dims    ndim x u32 little-endian
    payload row-major, last dimension fastest

A sequence bundle is a directory holding a ``manifest`` text file, per-frame
feature tensors under ``frames/``, and binary {0, 255} mask images under
``gt/``. This byte and directory layout is the wire contract shared with
feature exporters; any change bumps the manifest format version.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, InvalidArgumentError, InvalidInputError, ValidationError

MAGIC = b"BMT1"
FORMAT_VERSION = 1
FEATURE_SCALE = 16

DTYPE_FLOAT32 = 1
DTYPE_UINT8 = 2
_DTYPES = {DTYPE_FLOAT32: np.dtype("<f4"), DTYPE_UINT8: np.dtype("u1")}


# ---------------------------------------------------------------------------
# Tensor records
# ---------------------------------------------------------------------------


def _dtype_code(arr: np.ndarray) -> int:
    if arr.dtype.kind == "f":
        return DTYPE_FLOAT32
    if arr.dtype == np.uint8:
        return DTYPE_UINT8
    raise InvalidArgumentError(f"unsupported tensor dtype {arr.dtype}")


def write_tensor_record(fh, tensor: np.ndarray) -> None:
    """Append one tensor record to an open binary stream."""
    arr = np.ascontiguousarray(tensor)
    code = _dtype_code(arr)
    if code == DTYPE_FLOAT32:
        if not np.isfinite(arr).all():
            raise InvalidInputError("refusing to serialize non-finite values")
        arr = arr.astype("<f4", copy=False)
    if arr.ndim > 255:
        raise InvalidArgumentError("tensor rank exceeds format limit")
    if any(d > 0xFFFFFFFF for d in arr.shape):
        raise InvalidArgumentError("tensor dimension exceeds format limit")
    fh.write(MAGIC)
    fh.write(bytes([code, arr.ndim]))
    for dim in arr.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(arr.tobytes())


def read_tensor_record(fh) -> np.ndarray:
    """Read one tensor record from an open binary stream.

    Format errors name the absolute byte offset of the fault.
    """
    base = fh.tell()
    magic = fh.read(4)
    if len(magic) < 4:
        raise FormatError("truncated header: missing magic", offset=base + len(magic))
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=base)
    meta = fh.read(2)
    if len(meta) < 2:
        raise FormatError("truncated header: missing dtype/ndim", offset=base + 4 + len(meta))
    code, ndim = meta[0], meta[1]
    if code not in _DTYPES:
        raise FormatError(f"unknown dtype code {code}", offset=base + 4)
    dims_raw = fh.read(4 * ndim)
    if len(dims_raw) < 4 * ndim:
        raise FormatError("truncated header: missing dims", offset=base + 6 + len(dims_raw))
    dims = struct.unpack(f"<{ndim}I", dims_raw) if ndim else ()
    dtype = _DTYPES[code]
    count = 1
    for dim in dims:
        count *= dim
    payload = fh.read(count * dtype.itemsize)
    if len(payload) < count * dtype.itemsize:
        raise FormatError(
            "truncated payload", offset=base + 6 + 4 * ndim + len(payload)
        )
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def write_tensor(tensor: np.ndarray, path: str | Path) -> None:
    """Write a single tensor to its own file."""
    with open(path, "wb") as fh:
        write_tensor_record(fh, tensor)


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a single-tensor file; trailing bytes are a format error."""
    with open(path, "rb") as fh:
        arr = read_tensor_record(fh)
        extra = fh.read(1)
        if extra:
            raise FormatError("trailing data after tensor payload", offset=fh.tell() - 1)
    return arr


def read_tensor_records(path: str | Path) -> list[np.ndarray]:
    """Read all concatenated tensor records from a file."""
    records = []
    with open(path, "rb") as fh:
        while True:
            probe = fh.read(1)
            if not probe:
                break
            fh.seek(-1, 1)
            records.append(read_tensor_record(fh))
    return records


def read_tensor_header(path: str | Path) -> tuple[int, tuple[int, ...]]:
    """Return (dtype code, dims) without loading the payload."""
    with open(path, "rb") as fh:
        base = fh.tell()
        magic = fh.read(4)
        if len(magic) < 4 or magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}", offset=base)
        meta = fh.read(2)
        if len(meta) < 2:
            raise FormatError("truncated header", offset=base + 4 + len(meta))
        code, ndim = meta[0], meta[1]
        if code not in _DTYPES:
            raise FormatError(f"unknown dtype code {code}", offset=base + 4)
        dims_raw = fh.read(4 * ndim)
        if len(dims_raw) < 4 * ndim:
            raise FormatError("truncated header: missing dims", offset=base + 6 + len(dims_raw))
        dims = struct.unpack(f"<{ndim}I", dims_raw) if ndim else ()
    return code, tuple(dims)


# ---------------------------------------------------------------------------
# Structured text (manifests, scene configs, reports)
# ---------------------------------------------------------------------------


def parse_structured(text: str) -> dict:
    """Parse the structured-text dialect: ``key: value`` scalars and
    ``key:`` headers followed by two-space-indented list items."""
    data: dict = {}
    current_list: list[str] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        if raw.startswith("  "):
            if current_list is None:
                raise ValidationError(f"line {lineno}: indented item outside a list section")
            current_list.append(raw.strip())
            continue
        if ":" not in raw:
            raise ValidationError(f"line {lineno}: expected 'key: value', got {raw!r}")
        key, _, value = raw.partition(":")
        key = key.strip()
        value = value.strip()
        if value:
            data[key] = value
            current_list = None
        else:
            current_list = []
            data[key] = current_list
    return data


def render_structured(data: dict) -> str:
    lines = []
    for key, value in data.items():
        if isinstance(value, (list, tuple)):
            lines.append(f"{key}:")
            lines.extend(f"  {item}" for item in value)
        else:
            lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Mask images
# ---------------------------------------------------------------------------


def write_mask_png(mask: np.ndarray, path: str | Path) -> None:
    """Write a boolean mask as an 8-bit {0, 255} grayscale image."""
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def read_mask_png(path: str | Path) -> np.ndarray:
    """Read a binary mask image; any value other than 0 or 255 is an error."""
    arr = np.asarray(Image.open(path).convert("L"))
    bad = np.setdiff1d(np.unique(arr), [0, 255])
    if bad.size:
        raise ValidationError(f"{path}: mask values must be 0 or 255, found {bad.tolist()}")
    return arr == 255


def write_label_png(labels: np.ndarray, path: str | Path) -> None:
    """Write a label image with raw object indices as 8-bit values."""
    arr = np.asarray(labels)
    if arr.min() < 0 or arr.max() > 255:
        raise InvalidArgumentError("labels must fit in an 8-bit image")
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path, format="PNG")


def read_label_png(path: str | Path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("L")).astype(np.int32)


# ---------------------------------------------------------------------------
# Sequence bundles
# ---------------------------------------------------------------------------


@dataclass
class SequenceBundle:
    """In-memory view of one video's features, masks, and metadata."""

    channels: int
    feat_h: int
    feat_w: int
    full_h: int
    full_w: int
    n_frames: int
    n_objects: int
    features: tuple[np.ndarray, ...]  # (C, feat_h, feat_w) float32 per frame
    gt_masks: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def gt_labels(self, frame: int) -> np.ndarray | None:
        """Full-resolution label grid for a frame, or None if any object's
        mask is missing. Overlaps resolve toward the lowest object index."""
        planes = []
        for obj in range(1, self.n_objects + 1):
            mask = self.gt_masks.get((frame, obj))
            if mask is None:
                return None
            planes.append(mask)
        labels = np.zeros((self.full_h, self.full_w), dtype=np.int32)
        for obj in range(self.n_objects, 0, -1):
            labels[planes[obj - 1]] = obj
        return labels

    def frames_with_complete_gt(self) -> list[int]:
        return [
            t
            for t in range(self.n_frames)
            if all((t, obj) in self.gt_masks for obj in range(1, self.n_objects + 1))
        ]


_GT_NAME_RE = re.compile(r"gt/(\d{4})_obj(\d+)\.png")


def _frame_name(index: int) -> str:
    return f"frames/{index:04d}.bmt"


def _gt_name(frame: int, obj: int) -> str:
    return f"gt/{frame:04d}_obj{obj}.png"


def write_bundle(bundle: SequenceBundle, directory: str | Path) -> Path:
    """Persist a bundle; the resulting directory passes validate_bundle."""
    directory = Path(directory)
    (directory / "frames").mkdir(parents=True, exist_ok=True)
    (directory / "gt").mkdir(parents=True, exist_ok=True)
    frame_files = []
    for t, feat in enumerate(bundle.features):
        name = _frame_name(t)
        write_tensor(feat.astype(np.float32), directory / name)
        frame_files.append(name)
    gt_files = []
    for (t, obj) in sorted(bundle.gt_masks):
        name = _gt_name(t, obj)
        write_mask_png(bundle.gt_masks[(t, obj)], directory / name)
        gt_files.append(name)
    manifest = {
        "format_version": FORMAT_VERSION,
        "frames": bundle.n_frames,
        "objects": bundle.n_objects,
        "channels": bundle.channels,
        "feature_height": bundle.feat_h,
        "feature_width": bundle.feat_w,
        "full_height": bundle.full_h,
        "full_width": bundle.full_w,
        "frame_files": frame_files,
        "gt_files": gt_files,
    }
    (directory / "manifest").write_text(render_structured(manifest))
    return directory


@dataclass
class BundleReport:
    """Outcome of validate_bundle: every violation found, not just the first."""

    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


_MANIFEST_INT_KEYS = (
    "format_version",
    "frames",
    "objects",
    "channels",
    "feature_height",
    "feature_width",
    "full_height",
    "full_width",
)


def _parse_manifest(directory: Path, violations: list[str]) -> dict | None:
    manifest_path = directory / "manifest"
    if not manifest_path.is_file():
        violations.append("missing manifest")
        return None
    try:
        raw = parse_structured(manifest_path.read_text())
    except ValidationError as exc:
        violations.append(f"manifest: {exc}")
        return None
    meta = {}
    for key in _MANIFEST_INT_KEYS:
        if key not in raw:
            violations.append(f"manifest: missing key {key!r}")
            continue
        try:
            meta[key] = int(raw[key])
        except (TypeError, ValueError):
            violations.append(f"manifest: key {key!r} is not an integer")
    if len(meta) != len(_MANIFEST_INT_KEYS):
        return None
    if meta["format_version"] != FORMAT_VERSION:
        violations.append(
            f"manifest: unsupported format_version {meta['format_version']}"
        )
        return None
    for key in ("frames", "objects", "channels", "feature_height", "feature_width",
                "full_height", "full_width"):
        if meta[key] < 1:
            violations.append(f"manifest: {key} must be positive")
            return None
    meta["frame_files"] = list(raw.get("frame_files", []))
    meta["gt_files"] = list(raw.get("gt_files", []))
    return meta


def validate_bundle(directory: str | Path) -> BundleReport:
    """Check a bundle directory against the wire contract.

    Collects every violation instead of stopping at the first.
    """
    directory = Path(directory)
    violations: list[str] = []
    if not directory.is_dir():
        return BundleReport([f"{directory} is not a directory"])
    meta = _parse_manifest(directory, violations)
    if meta is None:
        return BundleReport(violations)

    if meta["feature_height"] != math.ceil(meta["full_height"] / FEATURE_SCALE):
        violations.append(
            "manifest: feature_height does not equal ceil(full_height / "
            f"{FEATURE_SCALE})"
        )
    if meta["feature_width"] != math.ceil(meta["full_width"] / FEATURE_SCALE):
        violations.append(
            "manifest: feature_width does not equal ceil(full_width / "
            f"{FEATURE_SCALE})"
        )

    expected_frames = [_frame_name(t) for t in range(meta["frames"])]
    listed = meta["frame_files"]
    for name in expected_frames:
        if name not in listed:
            violations.append(f"manifest: gap at {Path(name).stem}")
    for name in listed:
        if name not in expected_frames:
            violations.append(f"manifest: unexpected frame file entry {name}")

    expected_dims = (meta["channels"], meta["feature_height"], meta["feature_width"])
    for name in expected_frames:
        path = directory / name
        if not path.is_file():
            violations.append(f"{name}: file missing")
            continue
        try:
            code, dims = read_tensor_header(path)
        except FormatError as exc:
            violations.append(f"{name}: {exc}")
            continue
        if code != DTYPE_FLOAT32:
            violations.append(f"{name}: dtype code {code}, expected float32")
        if dims != expected_dims:
            violations.append(
                f"{name}: header dims {dims} do not match manifest dims {expected_dims}"
            )
            continue
        try:
            tensor = read_tensor(path)
        except FormatError as exc:
            violations.append(f"{name}: {exc}")
            continue
        if not np.isfinite(tensor).all():
            violations.append(f"{name}: non-finite feature values")

    full_dims = (meta["full_height"], meta["full_width"])
    for obj in range(1, meta["objects"] + 1):
        name = _gt_name(0, obj)
        if name not in meta["gt_files"]:
            violations.append(f"manifest: missing initial mask entry {name}")
    for name in meta["gt_files"]:
        if not _GT_NAME_RE.fullmatch(name):
            violations.append(f"manifest: malformed mask entry {name}")
            continue
        path = directory / name
        if not path.is_file():
            violations.append(f"{name}: file missing")
            continue
        try:
            mask = read_mask_png(path)
        except ValidationError as exc:
            violations.append(str(exc))
            continue
        if mask.shape != full_dims:
            violations.append(
                f"{name}: mask shape {mask.shape} does not match full resolution {full_dims}"
            )
    return BundleReport(violations)


def read_bundle(directory: str | Path) -> SequenceBundle:
    """Load a fully validated bundle into memory.

    Raises ValidationError carrying every violation if the directory does
    not satisfy the wire contract.
    """
    directory = Path(directory)
    report = validate_bundle(directory)
    if not report.ok:
        raise ValidationError(
            f"bundle {directory} is invalid: {'; '.join(report.violations)}",
            violations=report.violations,
        )
    meta = _parse_manifest(directory, [])
    assert meta is not None
    features = tuple(
        read_tensor(directory / _frame_name(t)) for t in range(meta["frames"])
    )
    gt_masks = {}
    for name in meta["gt_files"]:
        stem = Path(name).stem  # NNNN_objK
        frame_part, _, obj_part = stem.partition("_obj")
        gt_masks[(int(frame_part), int(obj_part))] = read_mask_png(directory / name)
    return SequenceBundle(
        channels=meta["channels"],
        feat_h=meta["feature_height"],
        feat_w=meta["feature_width"],
        full_h=meta["full_height"],
        full_w=meta["full_width"],
        n_frames=meta["frames"],
        n_objects=meta["objects"],
        features=features,
        gt_masks=gt_masks,
    )


# ---------------------------------------------------------------------------
# Score-map rendering
# ---------------------------------------------------------------------------


def render_score_map(y: np.ndarray, path: str | Path | None = None) -> np.ndarray:
    """Render a score map as an 8-bit grayscale image.

    Each map is linearly rescaled from [min, max] to [0, 255] (constant maps
    render as uniform 128), then upscaled 16x with nearest-neighbor so the
    feature grid is visible at image scale. Returns the pixel array; writes
    a PNG when a path is given.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise InvalidArgumentError(f"score map must be 2-d, got shape {y.shape}")
    if not np.isfinite(y).all():
        raise InvalidInputError("score map contains non-finite values")
    lo, hi = y.min(), y.max()
    if hi == lo:
        pixels = np.full(y.shape, 128, dtype=np.uint8)
    else:
        pixels = np.rint((y - lo) / (hi - lo) * 255.0).astype(np.uint8)
    pixels = np.repeat(np.repeat(pixels, FEATURE_SCALE, axis=0), FEATURE_SCALE, axis=1)
    if path is not None:
        Image.fromarray(pixels, mode="L").save(path, format="PNG")
    return pixels
