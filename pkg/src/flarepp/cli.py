"""Command-line front end.

Subcommands: gen (synthetic dataset), prepare (partition roles plus
optional balancing), train (checkpoint + epoch log), eval (metrics
report), metrics (scores straight from counts), curves (loss-curve CSV
families).  Report paths render an SVG figure next to each delimited
output.

Every command that produces files writes a run manifest
(`manifest.txt`) capturing the resolved configuration, and accepts
`--manifest-only` to write just that.  Exit codes: 0 success, 2
usage/config error, 3 training divergence, 4 undefined metric, 5 I/O
error.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import __version__
from .dataio import (
    ManifestRow,
    read_checkpoint,
    read_flat_config,
    read_manifest,
    read_raster,
    write_checkpoint,
    write_curve_csv,
    write_epoch_log,
    write_flat_config,
    write_manifest,
    write_raster,
)
from .figures import save_curves_figure, save_eval_figure, save_training_figure
from .loss import LossConfig, loss_curve
from .metrics import ConfusionMatrix, UndefinedScoreError, format_report, skill_scores
from .ordinal import DEFAULT_THRESHOLD, BinaryLabel, FlareClass, ThresholdSpec, binarize, proximity_weights
from .pipeline import (
    DEFAULT_ROLES,
    LabeledSample,
    assign_partitions,
    balance_training,
)
from .synth import ALL_MONTHS, synth_dataset
from .trainer import (
    FEATURE_KINDS,
    ModelSpec,
    TrainConfig,
    TrainingDivergedError,
    config_digest,
    evaluate,
    feature_split,
    train,
)

_COUNTS_USAGE = "expected per-class counts like FQ=100,C=50,M=20"


def _parse_counts(text: str) -> "dict[FlareClass, int]":
    counts: "dict[FlareClass, int]" = {}
    if not text.strip():
        return counts
    for item in text.split(","):
        if "=" not in item:
            raise ValueError(f"{_COUNTS_USAGE}; got {item!r}")
        cls_tok, _, num = item.partition("=")
        cls = FlareClass.from_token(cls_tok)
        n = int(num)
        if n < 0:
            raise ValueError(f"count for {cls.name} must be >= 0")
        if cls in counts:
            raise ValueError(f"duplicate count for {cls.name}")
        counts[cls] = n
    return counts


def _parse_rates(text: str) -> "dict[FlareClass, float]":
    rates: "dict[FlareClass, float]" = {}
    for item in text.split(","):
        if "=" not in item:
            raise ValueError(f"expected rates like FQ=0.06,B=0.3; got {item!r}")
        cls_tok, _, num = item.partition("=")
        rates[FlareClass.from_token(cls_tok)] = float(num)
    return rates


def _parse_months(text: str) -> "tuple[int, ...]":
    months = tuple(int(tok) for tok in text.split(","))
    if not months or any(m < 1 or m > 12 for m in months):
        raise ValueError("months must be a comma list within 1..12")
    return months


def _parse_alphas(text: str) -> "tuple[float, ...]":
    alphas = tuple(float(tok) for tok in text.split(","))
    if not alphas or any(a <= 0 for a in alphas):
        raise ValueError("alpha values must be positive")
    return alphas


def _check_seed(seed: int) -> int:
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    return seed


def _utcnow() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _write_run_manifest(out_dir: Path, command: str, settings: Mapping[str, object], started: str) -> None:
    items = {"command": command, "version": __version__}
    items.update({k: str(v) for k, v in settings.items()})
    items["started_utc"] = started
    items["finished_utc"] = _utcnow()
    write_flat_config(out_dir / "manifest.txt", items)


def _rerun_line(command: str, settings: Mapping[str, object]) -> str:
    parts = [f"flarepp {command}"]
    for key, value in settings.items():
        parts.append(f"--{key.replace('_', '-')} {value}")
    return " ".join(parts)


def _load_samples(data_dir: Path) -> "tuple[list[LabeledSample], list[ManifestRow]]":
    rows = read_manifest(data_dir / "samples.csv")
    samples = []
    for row in rows:
        samples.append(
            LabeledSample(
                image=read_raster(data_dir / row.image_path),
                subclass=row.subclass,
                label=row.label,
                timestamp=row.timestamp,
                region_id=row.region_id,
            )
        )
    return samples, rows


def _role_of_partition(partition: int) -> str:
    return DEFAULT_ROLES[partition]


def _write_dataset(
    out_dir: Path,
    samples: Sequence[LabeledSample],
    partitions: Mapping[int, int],
    id_prefix: str,
) -> "list[ManifestRow]":
    images = out_dir / "images"
    images.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, s in enumerate(samples):
        sample_id = f"{id_prefix}{i:06d}"
        rel = f"images/{sample_id}.txt"
        write_raster(out_dir / rel, s.image)
        rows.append(
            ManifestRow(
                sample_id=sample_id,
                region_id=s.region_id,
                timestamp=s.timestamp,
                subclass=s.subclass,
                label=s.label,
                partition=partitions[s.region_id],
                image_path=rel,
            )
        )
    write_manifest(out_dir / "samples.csv", rows)
    return rows


def cmd_gen(args) -> int:
    seed = _check_seed(args.seed)
    counts = _parse_counts(args.counts)
    months = _parse_months(args.months)
    threshold = ThresholdSpec.parse(args.threshold)
    out_dir = Path(args.out)
    settings = {
        "counts": args.counts,
        "size": args.size,
        "seed": seed,
        "months": args.months,
        "threshold": threshold,
        "out": out_dir,
    }
    settings["rerun"] = _rerun_line("gen", settings)
    started = _utcnow()
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.manifest_only:
        settings["manifest_only"] = "true"
        _write_run_manifest(out_dir, "gen", settings, started)
        return 0

    samples = synth_dataset(
        counts, image_size=args.size, seed=seed, months=months, threshold=threshold
    )
    if samples:
        assignment = assign_partitions((s.region_id, s.timestamp) for s in samples)
        partitions = dict(assignment.partition_of)
    else:
        partitions = {}
    rows = _write_dataset(out_dir, samples, partitions, "s")
    _write_run_manifest(out_dir, "gen", settings, started)
    print(f"wrote {len(rows)} samples to {out_dir}")
    return 0


def cmd_prepare(args) -> int:
    seed = _check_seed(args.seed)
    threshold = ThresholdSpec.parse(args.threshold)
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out)
    rates = _parse_rates(args.rates) if args.rates else None
    settings = {
        "in": in_dir,
        "threshold": threshold,
        "balance": str(bool(args.balance)).lower(),
        "seed": seed,
        "out": out_dir,
    }
    if args.rates:
        settings["rates"] = args.rates
    settings["rerun"] = _rerun_line("prepare", {k: v for k, v in settings.items() if k != "balance"}) + (
        " --balance" if args.balance else ""
    )
    started = _utcnow()
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.manifest_only:
        settings["manifest_only"] = "true"
        _write_run_manifest(out_dir, "prepare", settings, started)
        return 0

    samples, rows = _load_samples(in_dir)
    # Labels are re-derived from the stored subclasses under the active
    # threshold, so one generated dataset serves any split point.
    for s in samples:
        s.label = binarize(s.subclass, threshold)

    partitions = {row.region_id: row.partition for row in rows}
    by_role: "dict[str, list[LabeledSample]]" = {"train": [], "val": [], "test": []}
    for s, row in zip(samples, rows):
        by_role[_role_of_partition(row.partition)].append(s)
    missing = [role for role, lst in by_role.items() if not lst]
    if missing:
        raise ValueError(
            f"dataset has no samples for partition role(s): {', '.join(missing)}"
        )

    train_rows = by_role["train"]
    if args.balance:
        train_rows = balance_training(train_rows, rates, seed=seed, threshold=threshold)
    ordered = train_rows + by_role["val"] + by_role["test"]
    out_rows = _write_dataset(out_dir, ordered, partitions, "p")
    _write_run_manifest(out_dir, "prepare", settings, started)

    def _counts(lst):
        fl = sum(1 for s in lst if s.label == BinaryLabel.FL)
        return f"{len(lst)} samples, {fl} FL / {len(lst) - fl} NF"

    print(f"train: {_counts(train_rows)}" + (" (balanced)" if args.balance else ""))
    print(f"val:   {_counts(by_role['val'])}")
    print(f"test:  {_counts(by_role['test'])}")
    print(f"wrote {len(out_rows)} samples to {out_dir}")
    return 0


_TRAIN_KEYS = (
    "loss_kind", "initial_lr", "weight_decay", "batch_size", "alpha",
    "epochs", "seed", "model", "hidden", "feature", "threshold",
)


def _resolve_train_settings(args) -> "dict[str, str]":
    file_cfg: "dict[str, str]" = {}
    if args.config:
        file_cfg = read_flat_config(Path(args.config))
        unknown = set(file_cfg) - set(_TRAIN_KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")

    loss_kind = "bce_pp"
    if "loss_kind" in file_cfg:
        loss_kind = file_cfg["loss_kind"]
    if args.loss:
        loss_kind = args.loss.replace("-", "_")
    if loss_kind not in ("bce", "bce_pp"):
        raise ValueError(f"loss must be bce or bce-pp, got {loss_kind!r}")

    base = TrainConfig.defaults_for(loss_kind)
    resolved = {
        "loss_kind": loss_kind,
        "initial_lr": repr(base.initial_lr),
        "weight_decay": repr(base.weight_decay),
        "batch_size": str(base.batch_size),
        "alpha": repr(base.alpha),
        "epochs": str(base.epochs),
        "seed": "0",
        "model": "linear",
        "hidden": "",
        "feature": "flux",
        "threshold": str(DEFAULT_THRESHOLD),
    }
    for key, value in file_cfg.items():
        if key != "loss_kind":
            resolved[key] = value
    for key, flag in (
        ("initial_lr", args.lr),
        ("weight_decay", args.weight_decay),
        ("batch_size", args.batch_size),
        ("alpha", args.alpha),
        ("epochs", args.epochs),
        ("seed", args.seed),
        ("model", args.model),
        ("hidden", args.hidden),
        ("feature", args.feature),
        ("threshold", args.threshold),
    ):
        if flag is not None:
            resolved[key] = str(flag)
    return resolved


def cmd_train(args) -> int:
    resolved = _resolve_train_settings(args)
    loss_kind = resolved["loss_kind"]
    cfg = TrainConfig(
        initial_lr=float(resolved["initial_lr"]),
        weight_decay=float(resolved["weight_decay"]),
        batch_size=int(resolved["batch_size"]),
        alpha=float(resolved["alpha"]),
        epochs=int(resolved["epochs"]),
        seed=_check_seed(int(resolved["seed"])),
        loss_kind=loss_kind,
    )
    threshold = ThresholdSpec.parse(resolved["threshold"])
    feature = resolved["feature"]
    if feature not in FEATURE_KINDS:
        raise ValueError(f"feature must be one of {FEATURE_KINDS}")
    hidden = tuple(int(h) for h in resolved["hidden"].split(",") if h.strip())
    if resolved["model"] not in ("linear", "mlp"):
        raise ValueError("model must be linear or mlp")

    data_dir = Path(args.data)
    out_dir = Path(args.out)
    settings = {"data": data_dir, "out": out_dir, "loss": loss_kind.replace("_", "-")}
    settings.update(
        {
            k: resolved[k]
            for k in _TRAIN_KEYS
            if k not in ("loss_kind",) and not (k == "alpha" and loss_kind == "bce")
        }
    )
    if not hidden:
        settings.pop("hidden", None)
    started = _utcnow()
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.manifest_only:
        settings["manifest_only"] = "true"
        _write_run_manifest(out_dir, "train", settings, started)
        return 0

    samples, rows = _load_samples(data_dir)
    by_role: "dict[str, list[LabeledSample]]" = {}
    for s, row in zip(samples, rows):
        by_role.setdefault(_role_of_partition(row.partition), []).append(s)
    for role in ("train", "val"):
        if not by_role.get(role):
            raise ValueError(f"prepared dataset has no {role!r} samples")

    splits = {role: feature_split(lst, feature) for role, lst in by_role.items()}
    spec = ModelSpec(
        kind=resolved["model"],
        input_dim=splits["train"].x.shape[1],
        hidden_sizes=hidden,
    )
    result = train(splits, spec, cfg, threshold)

    write_checkpoint(
        out_dir / "checkpoint.txt",
        spec,
        result.params,
        meta={
            "feature": feature,
            "loss_kind": loss_kind,
            "threshold": str(threshold),
            "config_sha256": config_digest(cfg),
        },
    )
    write_epoch_log(out_dir / "epochs.csv", result.records)
    save_training_figure({loss_kind: result.records}, out_dir / "training.svg")
    _write_run_manifest(out_dir, "train", settings, started)

    last = result.records[-1]
    print(
        f"{loss_kind}: {cfg.epochs} epochs, final train loss {last.train_loss:.6f}, "
        f"val loss {last.val_loss:.6f}, val css {last.val_css:.4f} "
        f"(best css at epoch {result.best_css_epoch})"
    )
    print(f"wrote checkpoint.txt, epochs.csv, training.svg to {out_dir}")
    return 0


def cmd_eval(args) -> int:
    checkpoint = Path(args.checkpoint)
    data_dir = Path(args.data)
    out_dir = Path(args.out) if args.out else None
    if not 0.0 < args.cutoff < 1.0:
        raise ValueError("cutoff must lie in (0, 1)")
    settings = {
        "checkpoint": checkpoint,
        "data": data_dir,
        "split": args.split,
        "cutoff": args.cutoff,
    }
    if out_dir:
        settings["out"] = out_dir
    started = _utcnow()
    if args.manifest_only:
        if out_dir is None:
            raise ValueError("--manifest-only requires --out")
        out_dir.mkdir(parents=True, exist_ok=True)
        settings["manifest_only"] = "true"
        _write_run_manifest(out_dir, "eval", settings, started)
        return 0

    spec, params, meta = read_checkpoint(checkpoint)
    feature = meta.get("feature", "flux")
    samples, rows = _load_samples(data_dir)
    chosen = [
        s for s, row in zip(samples, rows) if _role_of_partition(row.partition) == args.split
    ]
    if not chosen:
        raise ValueError(f"dataset has no samples in the {args.split!r} split")
    cm, scores = evaluate(spec, params, feature_split(chosen, feature), args.cutoff)
    report = format_report(cm, scores)
    sys.stdout.write(report)
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(report, encoding="utf-8")
        save_eval_figure(cm, scores, out_dir / "evaluation.svg")
        _write_run_manifest(out_dir, "eval", settings, started)
        print(f"wrote report.txt, evaluation.svg to {out_dir}")
    return 0


def cmd_metrics(args) -> int:
    cm = ConfusionMatrix(tp=args.tp, fp=args.fp, tn=args.tn, fn=args.fn)
    out_dir = Path(args.out) if args.out else None
    settings = {"tp": args.tp, "fp": args.fp, "tn": args.tn, "fn": args.fn}
    started = _utcnow()
    if args.manifest_only:
        if out_dir is None:
            raise ValueError("--manifest-only requires --out")
        out_dir.mkdir(parents=True, exist_ok=True)
        settings["manifest_only"] = "true"
        _write_run_manifest(out_dir, "metrics", settings, started)
        return 0
    report = format_report(cm, skill_scores(cm))
    sys.stdout.write(report)
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(report, encoding="utf-8")
        settings["out"] = out_dir
        _write_run_manifest(out_dir, "metrics", settings, started)
    return 0


def cmd_curves(args) -> int:
    alphas = _parse_alphas(args.alpha)
    threshold = ThresholdSpec.parse(args.threshold)
    if args.grid < 2:
        raise ValueError("grid must have at least 2 points")
    out_dir = Path(args.out)
    settings = {
        "alpha": args.alpha,
        "threshold": threshold,
        "grid": args.grid,
        "out": out_dir,
    }
    settings["rerun"] = _rerun_line("curves", settings)
    started = _utcnow()
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.manifest_only:
        settings["manifest_only"] = "true"
        _write_run_manifest(out_dir, "curves", settings, started)
        return 0

    n = args.grid
    grid = np.arange(1, n + 1) / (n + 1)
    weights = proximity_weights(threshold)
    written = []
    for alpha in alphas:
        cfg = LossConfig(alpha=alpha, weights=weights)
        tables = []
        for subclass in FlareClass:
            target = binarize(subclass, threshold)
            table = loss_curve(subclass, target, cfg, grid)
            name = f"curves_{subclass.name}_a{alpha:g}.csv"
            write_curve_csv(out_dir / name, table)
            written.append(name)
            tables.append(table)
        save_curves_figure(tables, out_dir / f"curves_a{alpha:g}.svg")
    _write_run_manifest(out_dir, "curves", settings, started)
    print(f"wrote {len(written)} curve tables and {len(alphas)} figures to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flarepp",
        description="ordinal proximity-penalized BCE: data pipeline, training, scoring",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic labeled dataset")
    p.add_argument("--counts", required=True, help=_COUNTS_USAGE)
    p.add_argument("--size", type=int, default=512, help="square image side (default 512)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--months", default=",".join(str(m) for m in ALL_MONTHS),
                   help="calendar months to cycle region timestamps through")
    p.add_argument("--threshold", default=">=M")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest-only", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("prepare", help="apply partition roles and optional balancing")
    p.add_argument("--in", dest="in_dir", required=True, metavar="DIR")
    p.add_argument("--threshold", default=">=M")
    p.add_argument("--balance", action="store_true")
    p.add_argument("--rates", default="", help="override undersample rates, e.g. FQ=0.06,B=0.3")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest-only", action="store_true")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model on a prepared dataset")
    p.add_argument("--data", required=True, help="prepared dataset directory")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--loss", choices=("bce", "bce-pp"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--lr", type=float, dest="lr")
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--model", choices=("linear", "mlp"))
    p.add_argument("--hidden", help="comma list of hidden sizes for mlp")
    p.add_argument("--feature", choices=FEATURE_KINDS)
    p.add_argument("--threshold")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest-only", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("val", "test"), default="val")
    p.add_argument("--cutoff", type=float, default=0.5)
    p.add_argument("--out")
    p.add_argument("--manifest-only", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("metrics", help="skill scores from confusion counts")
    p.add_argument("--tp", type=int, required=True)
    p.add_argument("--fp", type=int, required=True)
    p.add_argument("--tn", type=int, required=True)
    p.add_argument("--fn", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--manifest-only", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("curves", help="emit loss-curve CSV tables and figures")
    p.add_argument("--alpha", default="0.25,1", help="comma list of scaling factors")
    p.add_argument("--threshold", default=">=M")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest-only", action="store_true")
    p.set_defaults(func=cmd_curves)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return args.func(args)
    except UndefinedScoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
