"""Round trips and format guards for the text file formats."""

from datetime import datetime

import numpy as np
import pytest

from flarepp.dataio import (
    MANIFEST_COLUMNS,
    ManifestRow,
    read_bitmap,
    read_checkpoint,
    read_curve_csv,
    read_epoch_log,
    read_flat_config,
    read_manifest,
    read_raster,
    write_bitmap,
    write_checkpoint,
    write_curve_csv,
    write_epoch_log,
    write_flat_config,
    write_manifest,
    write_raster,
)
from flarepp.loss import LossConfig, loss_curve
from flarepp.ordinal import BinaryLabel, FlareClass, binarize
from flarepp.trainer import EpochRecord, ModelSpec


def test_raster_roundtrip_is_exact(tmp_path):
    # repr serialization must survive awkward values bit for bit.
    arr = np.array([[1.0 / 3.0, -0.0, 1e-300], [255.0, 127.5, 3.141592653589793]])
    path = tmp_path / "r.txt"
    write_raster(path, arr)
    back = read_raster(path)
    assert back.dtype == np.float64
    assert np.array_equal(back, arr)
    # Deterministic bytes on rewrite.
    first = path.read_bytes()
    write_raster(path, arr)
    assert path.read_bytes() == first


def test_raster_header_and_truncation_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("NOT_A_RASTER 2 2\n0 0\n0 0\n")
    with pytest.raises(ValueError):
        read_raster(path)
    path.write_text("P_RASTER v1 2 2\n0.0 0.0\n")
    with pytest.raises(ValueError):
        read_raster(path)
    path.write_text("P_RASTER v1 2 2\n0.0 0.0\n0.0 0.0 0.0\n")
    with pytest.raises(ValueError):
        read_raster(path)


def test_bitmap_roundtrip(tmp_path):
    mask = np.array([[True, False, True], [False, True, False]])
    path = tmp_path / "b.txt"
    write_bitmap(path, mask)
    back = read_bitmap(path)
    assert back.dtype == np.bool_
    assert np.array_equal(back, mask)
    path.write_text("P_BITMAP v1 3 2\n1 0 1\n0 1\n")
    with pytest.raises(ValueError):
        read_bitmap(path)


def test_manifest_roundtrip(tmp_path):
    rows = [
        ManifestRow(
            sample_id=f"s{i:06d}",
            region_id=100 + i,
            timestamp=datetime(2014, 3, 1, 6, 30) if i else datetime(2015, 11, 2),
            subclass=cls,
            label=binarize(cls),
            partition=((3 if i else 11) - 1) % 4 + 1,
            image_path=f"images/s{i:06d}.txt",
        )
        for i, cls in enumerate((FlareClass.FQ, FlareClass.X))
    ]
    path = tmp_path / "samples.csv"
    write_manifest(path, rows)
    assert read_manifest(path) == rows
    header = path.read_text().splitlines()[0]
    assert tuple(header.split(",")) == MANIFEST_COLUMNS


def test_manifest_rejects_bad_header(tmp_path):
    path = tmp_path / "samples.csv"
    path.write_text("id,who\n1,2\n")
    with pytest.raises(ValueError):
        read_manifest(path)


def test_flat_config_roundtrip_and_comments(tmp_path):
    path = tmp_path / "cfg.txt"
    write_flat_config(path, {"loss_kind": "bce_pp", "alpha": "0.75"})
    text = path.read_text()
    assert text == "loss_kind=bce_pp\nalpha=0.75\n"
    path.write_text("# comment\n\nepochs = 50\nalpha=0.75\n")
    assert read_flat_config(path) == {"epochs": "50", "alpha": "0.75"}
    path.write_text("not a pair\n")
    with pytest.raises(ValueError):
        read_flat_config(path)
    with pytest.raises(ValueError):
        write_flat_config(path, {"a=b": "1"})
    with pytest.raises(ValueError):
        write_flat_config(path, {"a": "two\nlines"})


def test_curve_csv_roundtrip(tmp_path):
    table = loss_curve(
        FlareClass.M, BinaryLabel.FL, LossConfig(alpha=0.5), np.arange(1, 20) / 20.0
    )
    path = tmp_path / "c.csv"
    write_curve_csv(path, table)
    rows = read_curve_csv(path)
    assert len(rows) == 19
    for (p, lb, lp), want_p, want_lb, want_lp in zip(
        rows, table.p, table.loss_bce, table.loss_bce_pp
    ):
        # 9 significant digits of round trip.
        assert p == pytest.approx(want_p, rel=1e-8)
        assert lb == pytest.approx(want_lb, rel=1e-8)
        assert lp == pytest.approx(want_lp, rel=1e-8)
    path.write_text("p,a,b\n")
    with pytest.raises(ValueError):
        read_curve_csv(path)


def test_epoch_log_roundtrip_is_exact(tmp_path):
    records = [
        EpochRecord(epoch=1, train_loss=5.420718492660034, val_loss=1.0 / 3.0,
                    val_tss=0.5, val_hss=0.25, val_css=0.3535533905932738, lr=0.01),
        EpochRecord(epoch=2, train_loss=0.1, val_loss=0.2, val_tss=0.6,
                    val_hss=0.3, val_css=0.42426406871192853, lr=0.01 * 0.9),
    ]
    path = tmp_path / "epochs.csv"
    write_epoch_log(path, records)
    assert read_epoch_log(path) == records
    path.write_text("epoch,loss\n")
    with pytest.raises(ValueError):
        read_epoch_log(path)


def test_checkpoint_roundtrip_is_exact(tmp_path):
    spec = ModelSpec(kind="mlp", input_dim=3, hidden_sizes=(2,))
    params = np.array(
        [1.0 / 3.0, -2.0, 5e-324, 0.0, -0.0, 1e308, 0.1, 0.2, 0.3, -0.4, 0.5]
    )
    assert params.shape == (spec.n_params,)
    meta = {"feature": "flux", "loss_kind": "bce_pp", "threshold": ">=M"}
    path = tmp_path / "checkpoint.txt"
    write_checkpoint(path, spec, params, meta)
    spec2, params2, meta2 = read_checkpoint(path)
    assert spec2 == spec
    assert np.array_equal(params2, params)
    assert meta2 == meta


def test_checkpoint_guards(tmp_path):
    spec = ModelSpec(kind="linear", input_dim=2)
    path = tmp_path / "checkpoint.txt"
    with pytest.raises(ValueError):
        write_checkpoint(path, spec, np.zeros(7), {})
    with pytest.raises(ValueError):
        write_checkpoint(path, spec, np.zeros(3), {"kind": "oops"})
    path.write_text("WRONG MAGIC\n")
    with pytest.raises(ValueError):
        read_checkpoint(path)
    write_checkpoint(path, spec, np.zeros(3), {})
    text = path.read_text().splitlines()
    path.write_text("\n".join(text[:-1]) + "\n")   # drop one parameter line
    with pytest.raises(ValueError):
        read_checkpoint(path)
