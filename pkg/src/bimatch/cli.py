"""Command-line front end: full-sequence inference, single-pair matching,
evaluation, scene synthesis, and score-map rendering.

Exit codes: 0 on success, 1 for validation/format/input errors, 2 for usage
errors. Every error is written to standard error as a single line with the
stable prefix ``bimatch: <category>: <message>``.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    BimatchError,
    ConfigError,
    FormatError,
    InvalidArgumentError,
    InvalidInputError,
    StateError,
    ValidationError,
)
from .evaluation import evaluate_sequence, render_report
from .interchange import (
    FORMAT_VERSION,
    read_bundle,
    read_label_png,
    read_mask_png,
    read_tensor,
    render_score_map,
    write_bundle,
    write_label_png,
    write_tensor,
)
from .matching import MatchMode, match
from .pipeline import PipelineConfig, run_sequence
from .scenes import generate_scene, scene_config_from_text
from .tensors import FeatureMap, LabelMask, ProbMask, downsample_mask


def _err(category: str, message: str) -> None:
    print(f"bimatch: {category}: {message}", file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: A003 - argparse API
        _err("usage", message)
        raise SystemExit(2)


def _k_value(text: str) -> float:
    if text.strip().lower() == "inf":
        return math.inf
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a positive integer or 'inf', got {text!r}"
        ) from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return float(value)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bimatch", description=__doc__)
    parser.add_argument(
        "--version",
        action="version",
        version=f"bimatch {__version__} (bundle format {FORMAT_VERSION}, tensor format BMT1)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="segment a whole sequence bundle")
    run.add_argument("--bundle", required=True, help="input bundle directory")
    run.add_argument("--out", required=True, help="output directory for mask images")
    run.add_argument("--k-global", type=_k_value, default=math.inf,
                     help="top-K for global matching (integer or 'inf')")
    run.add_argument("--k-local", type=_k_value, default=4.0,
                     help="top-K for local matching (integer or 'inf')")
    run.add_argument("--history", type=int, default=3,
                     help="number of historic masks fed to the embedding")
    weights = run.add_mutually_exclusive_group()
    weights.add_argument("--seed", type=int, default=None,
                         help="seed for deterministic embedding weights")
    weights.add_argument("--weights", default=None, help="embedding weights file")
    run.add_argument("--dump-scores", action="store_true",
                     help="also write per-object score-map tensors")
    run.set_defaults(func=cmd_run)

    pair = sub.add_parser("match", help="match one reference/query tensor pair")
    pair.add_argument("--ref", required=True, help="reference feature tensor (.bmt)")
    pair.add_argument("--query", required=True, help="query feature tensor (.bmt)")
    pair.add_argument("--mask", required=True, help="reference mask image ({0,255} png)")
    pair.add_argument("--mode", choices=("surjective", "bijective"), default="surjective")
    pair.add_argument("--k", type=_k_value, default=4.0,
                      help="top-K for bijective mode (integer or 'inf')")
    pair.add_argument("--out", required=True, help="output directory for score tensors")
    pair.set_defaults(func=cmd_match)

    ev = sub.add_parser("eval", help="score predictions against ground truth")
    ev.add_argument("--pred", required=True, help="directory of predicted label images")
    ev.add_argument("--gt", required=True,
                    help="bundle directory or directory of NNNN_objK.png masks")
    ev.add_argument("--report", required=True, help="report file to write")
    ev.set_defaults(func=cmd_eval)

    synth = sub.add_parser("synth", help="generate a synthetic scene bundle")
    synth.add_argument("--config", required=True, help="scene config file")
    synth.add_argument("--out", required=True, help="bundle directory to write")
    synth.add_argument("--seed", type=int, default=None,
                       help="override the seed declared in the config")
    synth.set_defaults(func=cmd_synth)

    viz = sub.add_parser("viz-scores", help="render a score-map tensor as an image")
    viz.add_argument("--in", dest="input", required=True, help="2-d .bmt tensor")
    viz.add_argument("--out", required=True, help="grayscale image to write")
    viz.set_defaults(func=cmd_viz)

    return parser


def cmd_run(args) -> int:
    bundle = read_bundle(args.bundle)
    cfg = PipelineConfig(
        k_global=args.k_global,
        k_local=args.k_local,
        history_l=args.history,
        weights_seed=args.seed if args.seed is not None else 0,
        weights_path=args.weights,
    )
    predictions = run_sequence(bundle, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for t, prediction in enumerate(predictions):
        write_label_png(prediction.label_mask.labels, out / f"{t:04d}.png")
    if args.dump_scores:
        diag_dir = out / "diagnostics"
        diag_dir.mkdir(exist_ok=True)
        for t, prediction in enumerate(predictions):
            for obj, diag in enumerate(prediction.diagnostics, start=1):
                for branch, scores in (
                    ("global", diag.global_scores),
                    ("local", diag.local_scores),
                ):
                    write_tensor(scores.y_bg, diag_dir / f"{t:04d}_obj{obj}_{branch}_bg.bmt")
                    write_tensor(scores.y_fg, diag_dir / f"{t:04d}_obj{obj}_{branch}_fg.bmt")
    print(f"wrote {len(predictions)} mask images to {out}")
    return 0


def cmd_match(args) -> int:
    ref_arr = read_tensor(args.ref)
    qry_arr = read_tensor(args.query)
    if ref_arr.ndim != 3 or qry_arr.ndim != 3:
        raise InvalidArgumentError("feature tensors must be rank 3 (C, H, W)")
    ref = FeatureMap(ref_arr)
    qry = FeatureMap(qry_arr)
    mask_arr = read_mask_png(args.mask)
    mask = ProbMask.from_binary(mask_arr)
    if (mask.height, mask.width) != (ref.height, ref.width):
        mask = downsample_mask(mask, ref.height, ref.width)
    mode = MatchMode.surjective() if args.mode == "surjective" else MatchMode.bijective(args.k)
    scores = match(ref, qry, mask, mode)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(scores.y_bg, out / "y_bg.bmt")
    write_tensor(scores.y_fg, out / "y_fg.bmt")
    print(f"wrote score maps to {out}")
    return 0


_LABEL_RE = re.compile(r"^(\d{4})\.png$")
_OBJ_RE = re.compile(r"^(\d{4})_obj(\d+)\.png$")


def _read_pred_labels(directory: Path) -> list[np.ndarray]:
    frames = {}
    for path in directory.iterdir():
        m = _LABEL_RE.match(path.name)
        if m:
            frames[int(m.group(1))] = read_label_png(path)
    if not frames:
        raise ValidationError(f"no NNNN.png label images found in {directory}")
    count = max(frames) + 1
    missing = sorted(set(range(count)) - set(frames))
    if missing:
        raise ValidationError(f"prediction gap at frame {missing[0]:04d}")
    return [frames[t] for t in range(count)]


def _read_gt_labels(directory: Path) -> list[np.ndarray]:
    if (directory / "manifest").is_file():
        bundle = read_bundle(directory)
        frames = bundle.frames_with_complete_gt()
        labels = [bundle.gt_labels(t) for t in frames]
        if sorted(frames) != list(range(len(frames))):
            raise ValidationError("ground-truth masks are not contiguous from frame 0")
        return [lab for lab in labels if lab is not None]
    masks: dict[int, dict[int, np.ndarray]] = {}
    for path in directory.iterdir():
        m = _OBJ_RE.match(path.name)
        if m:
            masks.setdefault(int(m.group(1)), {})[int(m.group(2))] = read_mask_png(path)
    if not masks:
        raise ValidationError(f"no NNNN_objK.png masks found in {directory}")
    n_objects = max(max(per.keys()) for per in masks.values())
    count = max(masks) + 1
    labels = []
    for t in range(count):
        per = masks.get(t)
        if per is None or set(per) != set(range(1, n_objects + 1)):
            raise ValidationError(f"ground truth incomplete at frame {t:04d}")
        grid = np.zeros(per[1].shape, dtype=np.int32)
        for obj in range(n_objects, 0, -1):
            grid[per[obj]] = obj
        labels.append(grid)
    return labels


def cmd_eval(args) -> int:
    preds_raw = _read_pred_labels(Path(args.pred))
    gts_raw = _read_gt_labels(Path(args.gt))
    if len(preds_raw) != len(gts_raw):
        raise ValidationError(
            f"frame count mismatch: {len(preds_raw)} predictions vs "
            f"{len(gts_raw)} ground-truth frames"
        )
    n_objects = max(int(g.max()) for g in gts_raw)
    n_objects = max(n_objects, 1)
    preds = [LabelMask(p, num_objects=max(n_objects, int(p.max()))) for p in preds_raw]
    gts = [LabelMask(g, num_objects=n_objects) for g in gts_raw]
    report = evaluate_sequence(preds, gts)
    Path(args.report).write_text(render_report(report))
    print(
        f"J {report.j_mean:.4f}  F {report.f_mean:.4f}  G {report.g_mean:.4f} "
        f"({report.frame_count} frames, {report.object_count} objects)"
    )
    return 0


def cmd_synth(args) -> int:
    text = Path(args.config).read_text()
    cfg = scene_config_from_text(text, seed=args.seed)
    bundle = generate_scene(cfg)
    write_bundle(bundle, args.out)
    print(
        f"wrote bundle with {bundle.n_frames} frames, {bundle.n_objects} object(s) "
        f"to {args.out}"
    )
    return 0


def cmd_viz(args) -> int:
    tensor = read_tensor(args.input)
    if tensor.ndim != 2:
        raise InvalidArgumentError(f"score map must be rank 2, got rank {tensor.ndim}")
    render_score_map(tensor.astype(np.float64), args.out)
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValidationError, FormatError, InvalidInputError, InvalidArgumentError,
            StateError, ConfigError) as exc:
        category = {
            ValidationError: "validation",
            FormatError: "format",
            InvalidInputError: "input",
            InvalidArgumentError: "argument",
            StateError: "state",
            ConfigError: "config",
        }[type(exc)]
        _err(category, str(exc))
        return 1
    except FileNotFoundError as exc:
        _err("io", f"{exc.filename}: not found")
        return 1
    except OSError as exc:
        _err("io", str(exc))
        return 1
    except BimatchError as exc:
        _err("error", str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
