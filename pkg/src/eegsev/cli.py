"""Command-line surface: extract | synth | train | loso | sweep | report.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal error.
Every run writes a manifest.json (command, config snapshot, inputs, outputs,
seed, tool version, wall-clock duration) alongside its outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import (build_synth_config, build_train_config, parse_kv_file,
                     train_config_to_dict)
from .errors import ConfigError, DataError
from .features import DEFAULT_BANDS, BandSpec, extract_features
from .model import save_checkpoint
from .report import (build_fit_report, build_loso_report, load_report,
                     render_confusion_figure, render_history_figure,
                     render_sweep_figure, render_text, write_report)
from .storage import (load_feature_dir, read_raw_recording,
                      write_feature_store)
from .synth import flip_report, generate, write_truth
from .training import fit, loso

SWEEPABLE = ("u_rate", "conf_start_fraction")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _write_manifest(out_dir: Path, command: str, config: dict,
                    inputs: list[str], outputs: list[str], seed: int,
                    started: float) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
        "seed": seed,
        "tool_version": __version__,
        "duration_s": round(time.monotonic() - started, 3),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_config(path: str | None) -> dict[str, str]:
    return parse_kv_file(path) if path else {}


def _bands_from_config(kv: dict[str, str]) -> tuple[BandSpec, ...]:
    bands = []
    for default in DEFAULT_BANDS:
        raw = kv.get(f"band_{default.name}")
        if raw is None:
            bands.append(default)
            continue
        try:
            low, high = (float(t) for t in raw.split(","))
        except ValueError as exc:
            raise ConfigError(f"band_{default.name}: expected 'low,high', "
                              f"got {raw!r}") from exc
        bands.append(BandSpec(default.name, low, high))
    return tuple(bands)


def _prepare_out(args) -> Path:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _train_config(args, kv, subjects):
    channels = subjects[0].samples[0].features.shape[0]
    bands = subjects[0].samples[0].features.shape[1]
    inferred = max(s.label for s in subjects) + 1
    classes = int(kv.get("classes", inferred))
    cfg = build_train_config(kv, channels=channels, classes=classes,
                             bands=bands)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed,
                      model=replace(cfg.model, seed=args.seed))
    if args.no_confidence:
        cfg = replace(cfg, enable_confidence=False)
    if args.no_penalty:
        cfg = replace(cfg, enable_penalty=False)
    return cfg


def cmd_extract(args) -> int:
    started = time.monotonic()
    kv = _load_config(args.config)
    bands = _bands_from_config(kv)
    raw_dir = Path(args.raw_dir)
    files = sorted(raw_dir.glob("*.eegr"))
    if not files:
        raise DataError(f"no recordings found in {raw_dir}")
    out_dir = _prepare_out(args)
    outputs = []
    for f in files:
        try:
            rec = read_raw_recording(f)
            ds = extract_features(rec, bands)
        except (DataError, ConfigError) as exc:
            raise DataError(f"{f.name}: {exc}") from exc
        dest = out_dir / f"{ds.subject_id}.defs"
        write_feature_store(ds, dest)
        outputs.append(dest.name)
        n_epochs = len(ds.samples)
        n_chan = ds.samples[0].features.shape[0]
        print(f"{ds.subject_id}: {n_epochs} epochs, {n_chan} channels, "
              f"label {ds.label}")
    _write_manifest(out_dir, "extract", dict(kv), [str(f) for f in files],
                    outputs, seed=0, started=started)
    return 0


def cmd_synth(args) -> int:
    started = time.monotonic()
    kv = _load_config(args.config)
    cfg = build_synth_config(kv)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    subjects, truth = generate(cfg)
    out_dir = _prepare_out(args)
    outputs = []
    for ds in subjects:
        dest = out_dir / f"{ds.subject_id}.defs"
        write_feature_store(ds, dest)
        outputs.append(dest.name)
    write_truth(truth, out_dir / "truth.json")
    outputs.append("truth.json")
    summary = flip_report(truth)
    print(f"{len(subjects)} subjects written, "
          f"{summary['flipped_total']} flipped labels")
    _write_manifest(out_dir, "synth", dict(kv),
                    [args.config] if args.config else [],
                    outputs, seed=cfg.seed, started=started)
    return 0


def cmd_train(args) -> int:
    started = time.monotonic()
    kv = _load_config(args.config)
    subjects = load_feature_dir(args.feature_dir)
    cfg = _train_config(args, kv, subjects)
    params, history = fit(subjects, cfg)
    out_dir = _prepare_out(args)
    ckpt = out_dir / "checkpoint.dgcn"
    save_checkpoint(params, cfg.model, ckpt)
    report = build_fit_report(cfg, history)
    write_report(report, out_dir / "report.json")
    outputs = ["checkpoint.dgcn", "report.json"]
    if render_history_figure(report, out_dir / "history.png"):
        outputs.append("history.png")
    print(f"trained {cfg.total_epochs} epochs on {len(subjects)} subjects; "
          f"final loss {history[-1].total_loss:.4f}")
    _write_manifest(out_dir, "train", train_config_to_dict(cfg),
                    [args.feature_dir], outputs, cfg.seed, started)
    return 0


def cmd_loso(args) -> int:
    started = time.monotonic()
    kv = _load_config(args.config)
    subjects = load_feature_dir(args.feature_dir)
    if len(subjects) < 3:
        raise ConfigError("LOSO needs at least 3 subjects")
    cfg = _train_config(args, kv, subjects)
    folds, cm, metrics = loso(subjects, cfg, parallel=args.folds_parallel,
                              keep_history=args.keep_history)
    out_dir = _prepare_out(args)
    report = build_loso_report(cfg, folds, cm, metrics)
    write_report(report, out_dir / "report.json")
    outputs = ["report.json"]
    if render_confusion_figure(report, out_dir / "confusion.png"):
        outputs.append("confusion.png")
    print(render_text(report), end="")
    _write_manifest(out_dir, "loso", train_config_to_dict(cfg),
                    [args.feature_dir], outputs, cfg.seed, started)
    return 0


def cmd_sweep(args) -> int:
    started = time.monotonic()
    if args.param not in SWEEPABLE:
        raise ConfigError(
            f"unknown sweep parameter {args.param!r}; choose from "
            f"{', '.join(SWEEPABLE)}")
    try:
        values = [float(t) for t in args.values.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad sweep values {args.values!r}") from exc
    if not values:
        raise ConfigError("empty sweep value grid")

    kv = _load_config(args.config)
    subjects = load_feature_dir(args.feature_dir)
    base_cfg = _train_config(args, kv, subjects)
    out_dir = _prepare_out(args)

    rows = []
    for value in values:
        conf = replace(base_cfg.confidence, **{args.param: value})
        cfg = replace(base_cfg, confidence=conf)
        _, _, metrics = loso(subjects, cfg, parallel=args.folds_parallel)
        rows.append({
            "param": args.param,
            "value": value,
            "accuracy": metrics.accuracy,
            "macro_f1": metrics.macro[2],
        })
        print(f"{args.param}={value}: accuracy {metrics.accuracy:.4f}, "
              f"macro F1 {metrics.macro[2]:.4f}")

    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["param", "value", "accuracy",
                                                "macro_f1"])
        writer.writeheader()
        writer.writerows(rows)
    with open(out_dir / "sweep_long.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "value", "metric", "score"])
        for r in rows:
            writer.writerow([r["param"], r["value"], "accuracy", r["accuracy"]])
            writer.writerow([r["param"], r["value"], "macro_f1", r["macro_f1"]])
    render_sweep_figure(rows, out_dir / "sweep.png")
    _write_manifest(out_dir, "sweep", train_config_to_dict(base_cfg),
                    [args.feature_dir], ["sweep.csv", "sweep_long.csv",
                                         "sweep.png"],
                    base_cfg.seed, started)
    return 0


def cmd_report(args) -> int:
    report = load_report(args.report_json)
    text = render_text(report)
    print(text, end="")
    if args.out:
        out_dir = _prepare_out(args)
        (out_dir / "report.txt").write_text(text)
        render_confusion_figure(report, out_dir / "confusion.png")
        render_history_figure(report, out_dir / "history.png")
    return 0


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="key = value run config")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--folds-parallel", type=int, default=1, metavar="K",
                        help="run LOSO folds in K worker processes")
    common.add_argument("--no-confidence", action="store_true",
                        help="disable the sample-confidence module")
    common.add_argument("--no-penalty", action="store_true",
                        help="disable the minority-penalty module")

    parser = _Parser(prog="eegsev", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("extract", parents=[common],
                       help="raw recordings -> per-subject feature stores")
    p.add_argument("raw_dir")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic feature dataset")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common],
                       help="fit on all subjects and save a checkpoint")
    p.add_argument("feature_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("loso", parents=[common],
                       help="leave-one-subject-out evaluation")
    p.add_argument("feature_dir")
    p.add_argument("--keep-history", action="store_true",
                   help="embed full per-fold training history in the report")
    p.set_defaults(func=cmd_loso)

    p = sub.add_parser("sweep", parents=[common],
                       help="grid sweep of one hyperparameter via LOSO")
    p.add_argument("feature_dir")
    p.add_argument("--param", required=True,
                   help=f"one of: {', '.join(SWEEPABLE)}")
    p.add_argument("--values", required=True, help="comma-separated grid")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", parents=[common],
                       help="render a report JSON as text and figures")
    p.add_argument("report_json")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
