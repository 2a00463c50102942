"""Region accuracy J, contour accuracy F, and their mean G.

J is plain intersection-over-union. F is a boundary F-measure: one-pixel
boundaries are extracted with 4-connectivity against background or the
image border, dilated by a disk whose radius is round(0.008 * image
diagonal), and matched in both directions. Both metrics define the
both-empty case as 1 so correct absence is not penalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidArgumentError, ValidationError
from .tensors import LabelMask

DEFAULT_BOUNDARY_TOL = 0.008


def _as_binary(mask: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-d, got shape {arr.shape}")
    return arr.astype(bool)


def region_accuracy_j(pred: np.ndarray, gt: np.ndarray) -> float:
    """Intersection-over-union; 1.0 when both masks are empty."""
    pred = _as_binary(pred, "pred")
    gt = _as_binary(gt, "gt")
    if pred.shape != gt.shape:
        raise InvalidArgumentError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    union = np.logical_or(pred, gt).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred, gt).sum() / union)


def mask_boundary(mask: np.ndarray) -> np.ndarray:
    """One-pixel boundary: foreground pixels with a 4-neighbor outside the
    mask or outside the image."""
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    interior = (
        padded[:-2, 1:-1]
        & padded[2:, 1:-1]
        & padded[1:-1, :-2]
        & padded[1:-1, 2:]
    )
    return mask & ~interior


def _disk(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    return span[:, None] ** 2 + span[None, :] ** 2 <= radius**2


def contour_accuracy_f(
    pred: np.ndarray, gt: np.ndarray, tol_factor: float = DEFAULT_BOUNDARY_TOL
) -> float:
    """Boundary F-measure with a tolerance radius scaled to the image size."""
    pred = _as_binary(pred, "pred")
    gt = _as_binary(gt, "gt")
    if pred.shape != gt.shape:
        raise InvalidArgumentError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    if not pred.any() and not gt.any():
        return 1.0
    if not pred.any() or not gt.any():
        return 0.0
    pred_b = mask_boundary(pred)
    gt_b = mask_boundary(gt)
    h, w = pred.shape
    radius = int(round(tol_factor * float(np.hypot(h, w))))
    if radius >= 1:
        structure = _disk(radius)
        pred_dil = ndimage.binary_dilation(pred_b, structure=structure)
        gt_dil = ndimage.binary_dilation(gt_b, structure=structure)
    else:
        pred_dil, gt_dil = pred_b, gt_b
    precision = float((pred_b & gt_dil).sum() / pred_b.sum())
    recall = float((gt_b & pred_dil).sum() / gt_b.sum())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class EvalReport:
    """Per-object, per-frame metrics for frames 1..T-1 plus sequence means.

    Frame 0 is the supplied ground truth and is excluded from every mean.
    """

    frame_indices: tuple[int, ...]
    per_frame_j: np.ndarray  # (len(frame_indices), n_objects)
    per_frame_f: np.ndarray
    j_mean: float
    f_mean: float
    g_mean: float
    frame_count: int
    object_count: int


def evaluate_sequence(preds: list[LabelMask], gts: list[LabelMask]) -> EvalReport:
    """Per-object binary decomposition and J/F/G means over frames 1..T-1."""
    if len(preds) != len(gts):
        raise InvalidArgumentError(
            f"frame count mismatch: {len(preds)} predictions vs {len(gts)} ground truths"
        )
    if not preds:
        raise InvalidArgumentError("no frames to evaluate")
    for t, (p, g) in enumerate(zip(preds, gts)):
        if (p.height, p.width) != (g.height, g.width):
            raise InvalidArgumentError(
                f"frame {t}: shape mismatch {p.height}x{p.width} vs {g.height}x{g.width}"
            )
    if len(preds) < 2:
        raise ValidationError("nothing to evaluate: frame 0 is the given ground truth")
    n_objects = gts[0].num_objects
    if n_objects < 1:
        raise ValidationError("ground truth declares no objects")
    frame_indices = tuple(range(1, len(preds)))
    per_j = np.zeros((len(frame_indices), n_objects))
    per_f = np.zeros((len(frame_indices), n_objects))
    for row, t in enumerate(frame_indices):
        for obj in range(1, n_objects + 1):
            pred_mask = preds[t].object_mask(obj)
            gt_mask = gts[t].object_mask(obj)
            per_j[row, obj - 1] = region_accuracy_j(pred_mask, gt_mask)
            per_f[row, obj - 1] = contour_accuracy_f(pred_mask, gt_mask)
    j_mean = float(per_j.mean())
    f_mean = float(per_f.mean())
    return EvalReport(
        frame_indices=frame_indices,
        per_frame_j=per_j,
        per_frame_f=per_f,
        j_mean=j_mean,
        f_mean=f_mean,
        g_mean=(j_mean + f_mean) / 2.0,
        frame_count=len(preds),
        object_count=n_objects,
    )


def render_report(report: EvalReport) -> str:
    """Human-readable structured text: summary keys plus per-frame tables."""
    lines = [
        f"frames: {report.frame_count}",
        f"objects: {report.object_count}",
        f"j_mean: {report.j_mean:.6f}",
        f"f_mean: {report.f_mean:.6f}",
        f"g_mean: {report.g_mean:.6f}",
        "per_object:",
    ]
    for obj in range(report.object_count):
        j = report.per_frame_j[:, obj].mean()
        f = report.per_frame_f[:, obj].mean()
        lines.append(f"  object {obj + 1}: j={j:.6f} f={f:.6f} g={(j + f) / 2:.6f}")
    lines.append("per_frame:")
    for row, t in enumerate(report.frame_indices):
        for obj in range(report.object_count):
            lines.append(
                f"  frame {t:04d} obj {obj + 1}: "
                f"j={report.per_frame_j[row, obj]:.6f} "
                f"f={report.per_frame_f[row, obj]:.6f}"
            )
    return "\n".join(lines) + "\n"
