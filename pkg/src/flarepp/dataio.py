"""File formats: rasters, bitmaps, sample manifests, flat configs,
loss-curve tables, epoch logs, checkpoints, and metrics reports.

Everything is plain text with deterministic formatting so deterministic
commands produce byte-identical files on rerun.  Floats that must
round-trip exactly are written with repr() (shortest exact decimal) or,
for checkpoints, float.hex().
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Tuple

import numpy as np

from .loss import CurveTable
from .ordinal import BinaryLabel, FlareClass
from .trainer import EpochRecord, ModelSpec

__all__ = [
    "ManifestRow",
    "write_raster",
    "read_raster",
    "write_bitmap",
    "read_bitmap",
    "write_manifest",
    "read_manifest",
    "write_flat_config",
    "read_flat_config",
    "write_curve_csv",
    "read_curve_csv",
    "write_epoch_log",
    "read_epoch_log",
    "write_checkpoint",
    "read_checkpoint",
    "MANIFEST_COLUMNS",
]

_RASTER_MAGIC = "P_RASTER v1"
_BITMAP_MAGIC = "P_BITMAP v1"
_CHECKPOINT_MAGIC = "PP_CHECKPOINT v1"

MANIFEST_COLUMNS = (
    "sample_id",
    "region_id",
    "timestamp",
    "subclass",
    "label",
    "partition",
    "image_path",
)


def write_raster(path, values: np.ndarray) -> None:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"raster must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{_RASTER_MAGIC} {w} {h}\n")
        for row in arr:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_raster(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split()
        if len(parts) != 4 or " ".join(parts[:2]) != _RASTER_MAGIC:
            raise ValueError(f"{path}: not a raster file (header {header!r})")
        w, h = int(parts[2]), int(parts[3])
        rows = []
        for i in range(h):
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: truncated after {i} of {h} rows")
            row = [float(tok) for tok in line.split()]
            if len(row) != w:
                raise ValueError(f"{path}: row {i} has {len(row)} values, expected {w}")
            rows.append(row)
    return np.array(rows, dtype=np.float64)


def write_bitmap(path, mask: np.ndarray) -> None:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"bitmap must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{_BITMAP_MAGIC} {w} {h}\n")
        for row in arr:
            fh.write(" ".join("1" if v else "0" for v in row))
            fh.write("\n")


def read_bitmap(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split()
        if len(parts) != 4 or " ".join(parts[:2]) != _BITMAP_MAGIC:
            raise ValueError(f"{path}: not a bitmap file (header {header!r})")
        w, h = int(parts[2]), int(parts[3])
        rows = []
        for i in range(h):
            toks = fh.readline().split()
            if len(toks) != w:
                raise ValueError(f"{path}: bitmap row {i} has {len(toks)} values, expected {w}")
            rows.append([tok == "1" for tok in toks])
    return np.array(rows, dtype=bool)


@dataclass(frozen=True)
class ManifestRow:
    """One line of a dataset sample index."""

    sample_id: str
    region_id: int
    timestamp: datetime
    subclass: FlareClass
    label: BinaryLabel
    partition: int
    image_path: str


def write_manifest(path, rows: Iterable[ManifestRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.sample_id,
                    r.region_id,
                    r.timestamp.isoformat(),
                    r.subclass.name,
                    r.label.name,
                    r.partition,
                    r.image_path,
                ]
            )


def read_manifest(path) -> "list[ManifestRow]":
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != MANIFEST_COLUMNS:
            raise ValueError(f"{path}: bad manifest header {header!r}")
        rows = []
        for rec in reader:
            if len(rec) != len(MANIFEST_COLUMNS):
                raise ValueError(f"{path}: bad manifest row {rec!r}")
            rows.append(
                ManifestRow(
                    sample_id=rec[0],
                    region_id=int(rec[1]),
                    timestamp=datetime.fromisoformat(rec[2]),
                    subclass=FlareClass.from_token(rec[3]),
                    label=BinaryLabel[rec[4]],
                    partition=int(rec[5]),
                    image_path=rec[6],
                )
            )
    return rows


def write_flat_config(path, items: Mapping[str, str]) -> None:
    """key=value per line, insertion order preserved."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in items.items():
            key = str(key)
            if "=" in key or "\n" in key:
                raise ValueError(f"bad config key {key!r}")
            value = str(value)
            if "\n" in value:
                raise ValueError(f"config value for {key} must be single-line")
            fh.write(f"{key}={value}\n")


def read_flat_config(path) -> "dict[str, str]":
    out: "dict[str, str]" = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def write_curve_csv(path, table: CurveTable) -> None:
    """p,loss_bce,loss_bce_pp rows at 9 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("p,loss_bce,loss_bce_pp\n")
        for p, lb, lp in zip(table.p, table.loss_bce, table.loss_bce_pp):
            fh.write(f"{p:.9g},{lb:.9g},{lp:.9g}\n")


def read_curve_csv(path) -> "list[Tuple[float, float, float]]":
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "p,loss_bce,loss_bce_pp":
            raise ValueError(f"{path}: bad curve header {header!r}")
        rows = []
        for line in fh:
            p, lb, lp = line.strip().split(",")
            rows.append((float(p), float(lb), float(lp)))
    return rows


_EPOCH_COLUMNS = ("epoch", "train_loss", "val_loss", "val_tss", "val_hss", "val_css", "lr")


def write_epoch_log(path, records: Sequence[EpochRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(_EPOCH_COLUMNS) + "\n")
        for r in records:
            fh.write(
                f"{r.epoch},{r.train_loss!r},{r.val_loss!r},"
                f"{r.val_tss!r},{r.val_hss!r},{r.val_css!r},{r.lr!r}\n"
            )


def read_epoch_log(path) -> "list[EpochRecord]":
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if tuple(header.split(",")) != _EPOCH_COLUMNS:
            raise ValueError(f"{path}: bad epoch log header {header!r}")
        records = []
        for line in fh:
            e, tl, vl, ts, hs, cs, lr = line.strip().split(",")
            records.append(
                EpochRecord(
                    epoch=int(e),
                    train_loss=float(tl),
                    val_loss=float(vl),
                    val_tss=float(ts),
                    val_hss=float(hs),
                    val_css=float(cs),
                    lr=float(lr),
                )
            )
    return records


def write_checkpoint(path, spec: ModelSpec, params: np.ndarray, meta: Mapping[str, str]) -> None:
    """Versioned text checkpoint: model shape, metadata, hex parameters."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (spec.n_params,):
        raise ValueError(
            f"parameter vector shape {params.shape} does not match spec ({spec.n_params},)"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_CHECKPOINT_MAGIC + "\n")
        fh.write(f"kind={spec.kind}\n")
        fh.write(f"input_dim={spec.input_dim}\n")
        fh.write(f"hidden={','.join(str(h) for h in spec.hidden_sizes)}\n")
        for key in sorted(meta):
            if key in ("kind", "input_dim", "hidden", "n_params"):
                raise ValueError(f"meta key {key!r} collides with a structural field")
            fh.write(f"{key}={meta[key]}\n")
        fh.write(f"n_params={params.shape[0]}\n")
        for v in params:
            fh.write(float(v).hex() + "\n")


def read_checkpoint(path) -> Tuple[ModelSpec, np.ndarray, "dict[str, str]"]:
    with open(path, "r", encoding="utf-8") as fh:
        magic = fh.readline().rstrip("\n")
        if magic != _CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint (header {magic!r})")
        meta: "dict[str, str]" = {}
        n_params = None
        for raw in fh:
            line = raw.rstrip("\n")
            if "=" not in line:
                raise ValueError(f"{path}: malformed checkpoint line {line!r}")
            key, value = line.split("=", 1)
            if key == "n_params":
                n_params = int(value)
                break
            meta[key] = value
        if n_params is None:
            raise ValueError(f"{path}: checkpoint missing n_params")
        values = []
        for _ in range(n_params):
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: truncated parameter block")
            values.append(float.fromhex(line.strip()))
    hidden = tuple(int(h) for h in meta.pop("hidden").split(",") if h)
    spec = ModelSpec(
        kind=meta.pop("kind"),
        input_dim=int(meta.pop("input_dim")),
        hidden_sizes=hidden,
    )
    params = np.array(values, dtype=np.float64)
    if params.shape != (spec.n_params,):
        raise ValueError(f"{path}: parameter count mismatch")
    return spec, params, meta
