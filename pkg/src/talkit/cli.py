"""Command-line entry point: ``talkit <subcommand> ...``.

Exit codes: 0 success, 1 parse/validation/input failure, 2 usage error.
Tables go to stdout, artifacts to files, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from pathlib import Path

from . import formats
from .ensemble import DEFAULT_MERGE_THRESHOLD, EnsembleStats, WeightedModel, ensemble_pipeline
from .errors import TalError, ValidationError
from .evaluation import DEFAULT_THRESHOLDS, EvalConfig, evaluate
from .localizer import localize
from .segments import validate_prediction_set
from .simulator import SimConfig, SweepConfig, generate_ground_truth, simulate_classifier, sweep


class CliFailure(Exception):
    """Raised by subcommands to exit with code 1 after printing a message."""


def _thresholds(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(",") if x.strip())
        EvalConfig(thresholds=values)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return values


def _unit_interval(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"{value} is not in (0, 1]")
    return value


def _fps(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not (math.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"{value} is not a positive frame rate")
    return value


def _add_fps(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fps", type=_fps, default=None,
                   help="submission and ground-truth times are frame indices at this rate (default: seconds)")


def cmd_localize(args) -> int:
    streams = []
    for path in args.streams:
        streams.extend(formats.parse_streams(path))
    preds = localize(streams, bridge_gaps=args.bridge_gaps, aggregate=args.aggregate)
    formats.serialize_submission(preds, args.out, fps=args.fps)
    print(f"{len(preds)} video(s), {preds.n_segments} segment(s) -> {args.out}")
    return 0


def _model_ids(paths) -> list[str]:
    stems = [Path(p).stem for p in paths]
    if len(set(stems)) == len(stems):
        return stems
    return [f"{i}:{s}" for i, s in enumerate(stems)]


def cmd_ensemble(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cfg = formats.parse_ensemble_config(args.config)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    threshold = args.threshold if args.threshold is not None else cfg.threshold
    models = []
    for mid, (path, weight) in zip(_model_ids([p for p, _ in cfg.models]), cfg.models):
        if not path.is_file():
            raise CliFailure(f"submission file not found: {path}")
        preds = formats.parse_submission(path, strict=not args.lenient, n_classes=args.n_classes, fps=args.fps)
        models.append(WeightedModel(mid, weight, preds))
    stats = EnsembleStats()
    fused = ensemble_pipeline(models, threshold, stats=stats)
    formats.serialize_submission(fused, args.out, fps=args.fps)
    for line in stats.lines():
        print(line)
    print(f"merge threshold {threshold} -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    gt = formats.parse_ground_truth(args.gt, args.gt_format, fps=args.fps)
    n_classes = args.n_classes if args.n_classes is not None else gt.n_classes
    preds = formats.parse_submission(args.pred, strict=not args.lenient, n_classes=n_classes, fps=args.fps)
    cfg = EvalConfig(
        thresholds=args.thresholds,
        n_classes=n_classes,
        interpolation=args.interpolation,
        strict=not args.lenient,
    )
    report = evaluate(preds, gt, cfg)
    print(report.format_table())
    out = args.report or Path(args.pred).with_suffix(".eval.json")
    formats.write_report(report, out, {"pred": str(args.pred), "gt": str(args.gt)})
    return 0


def _load_sim_config(path, seed):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliFailure(f"{path}: bad JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise CliFailure(f"{path}: config must be a JSON object")
    simulate_opts = doc.pop("simulate", {})
    sweep_opts = doc.pop("sweep", {})
    sim = SimConfig.from_dict(doc)
    if seed is not None:
        sim = SimConfig.from_dict({**sim.to_dict(), "seed": seed})
    return sim, simulate_opts, sweep_opts


def cmd_simulate(args) -> int:
    sim, opts, _ = _load_sim_config(args.config, args.seed)
    t = float(opts.get("t", 0.5))
    n_models = int(opts.get("n_models", 1))
    out = Path(args.out_dir)
    (out / "streams").mkdir(parents=True, exist_ok=True)
    gt = generate_ground_truth(sim)
    formats.serialize_ground_truth(gt, out / "ground_truth.csv")
    for m in range(n_models):
        streams = simulate_classifier(gt, t, sim, sim.seed, model=m)
        formats.serialize_streams(streams, out / "streams" / f"model_{m}.txt")
    (out / "config.json").write_text(
        json.dumps({**sim.to_dict(), "simulate": {"t": t, "n_models": n_models}}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"{len(gt)} video(s), {gt.n_annotations} action(s), {n_models} stream file(s) at t={t} -> {out}")
    return 0


SWEEP_FIELDS = ("t", "noise", "n_models", "method", "final_score", "best_single", "mean_single")


def cmd_sweep(args) -> int:
    sim, _, opts = _load_sim_config(args.config, args.seed)
    sweep_cfg = SweepConfig.from_dict(opts)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gt = generate_ground_truth(sim)
    formats.serialize_ground_truth(gt, out / "ground_truth.csv")
    rows = sweep(gt, sim, sweep_cfg, sim.seed, jobs=args.jobs)
    records = [
        {
            "t": r.t,
            "noise": r.noise,
            "n_models": r.n_models,
            "method": r.method,
            "final_score": r.final_score,
            "best_single": r.best_single,
            "mean_single": sum(r.single_scores) / len(r.single_scores),
            "single_scores": r.single_scores,
            "weights": r.weights,
        }
        for r in rows
    ]
    (out / "sweep.json").write_text(
        json.dumps({"config": sim.to_dict(), "rows": records}, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_FIELDS)
        for rec in records:
            writer.writerow([rec["t"], rec["noise"], rec["n_models"], rec["method"]]
                            + [f"{rec[k]:.6f}" for k in ("final_score", "best_single", "mean_single")])
    print(f"{'method':<14} {'t':>6} {'noise':>6} {'final':>9} {'best single':>12}")
    for rec in records:
        print(f"{rec['method']:<14} {rec['t']:>6} {rec['noise']:>6} {rec['final_score']:>9.6f} {rec['best_single']:>12.6f}")
    return 0


def cmd_validate(args) -> int:
    violations = []
    if args.pred:
        preds = formats.load_submission(args.pred, fps=args.fps)
        violations += [f"{args.pred}: {v}" for v in validate_prediction_set(preds, args.n_classes)]
    if args.gt:
        try:
            formats.parse_ground_truth(args.gt, args.gt_format, fps=args.fps)
        except ValidationError as exc:
            violations += [f"{args.gt}: {v}" for v in exc.violations]
    for v in violations:
        print(v)
    print("valid" if not violations else f"{len(violations)} violation(s)")
    return 1 if violations else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="talkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("localize", help="merge interval streams into a submission file")
    p.add_argument("--streams", nargs="+", required=True, metavar="PATH")
    p.add_argument("--out", required=True)
    p.add_argument("--bridge-gaps", action="store_true", help="absorb single background intervals inside a run")
    p.add_argument("--aggregate", choices=("max", "mean"), default="max")
    _add_fps(p)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("ensemble", help="fuse weighted submission files")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=_unit_interval, default=None,
                   help=f"IoU merge threshold; overrides the config (default {DEFAULT_MERGE_THRESHOLD})")
    p.add_argument("--n-classes", type=int, default=None)
    p.add_argument("--lenient", action="store_true", help="clamp out-of-range confidences")
    _add_fps(p)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("eval", help="score a submission against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--gt-format", choices=("auto", "csv", "json"), default="auto")
    p.add_argument("--thresholds", type=_thresholds, default=DEFAULT_THRESHOLDS)
    p.add_argument("--n-classes", type=int, default=None)
    p.add_argument("--interpolation", choices=("101", "all"), default="101")
    p.add_argument("--lenient", action="store_true", help="clamp confidences and ignore unknown videos")
    p.add_argument("--report", default=None, help="structured report path (default: <pred>.eval.json)")
    _add_fps(p)
    p.set_defaults(func=cmd_eval)

    for name, func, text in (
        ("simulate", cmd_simulate, "generate synthetic ground truth and interval streams"),
        ("sweep", cmd_sweep, "score the interval-size / noise / ensemble grid"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--out-dir", required=True)
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        if name == "sweep":
            p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        p.set_defaults(func=func)

    p = sub.add_parser("validate", help="check a submission and/or ground-truth file")
    p.add_argument("--pred")
    p.add_argument("--gt")
    p.add_argument("--gt-format", choices=("auto", "csv", "json"), default="auto")
    p.add_argument("--n-classes", type=int, default=None)
    _add_fps(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "validate" and not (args.pred or args.gt):
        parser.error("validate needs --pred and/or --gt")
    try:
        return args.func(args)
    except (TalError, CliFailure, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
