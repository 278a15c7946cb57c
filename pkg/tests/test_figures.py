"""SVG rendering smoke tests and byte-level determinism."""

import numpy as np
import pytest

from flarepp.figures import save_curves_figure, save_eval_figure, save_training_figure
from flarepp.loss import LossConfig, loss_curve
from flarepp.metrics import ConfusionMatrix, skill_scores
from flarepp.ordinal import FlareClass, binarize, proximity_weights
from flarepp.trainer import EpochRecord


def _tables():
    cfg = LossConfig(alpha=0.75, weights=proximity_weights())
    grid = np.arange(1, 50) / 50.0
    return [loss_curve(c, binarize(c), cfg, grid) for c in FlareClass]


def _records():
    return [
        EpochRecord(epoch=e, train_loss=1.0 / e, val_loss=1.2 / e,
                    val_tss=0.5, val_hss=0.3, val_css=0.38, lr=0.01)
        for e in range(1, 6)
    ]


def test_curves_figure_is_svg_and_deterministic(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    save_curves_figure(_tables(), a)
    save_curves_figure(_tables(), b)
    data = a.read_bytes()
    assert data[:5] == b"<?xml"
    assert b"</svg>" in data
    assert data == b.read_bytes()
    with pytest.raises(ValueError):
        save_curves_figure([], tmp_path / "c.svg")


def test_training_figure(tmp_path):
    path = tmp_path / "training.svg"
    save_training_figure({"bce": _records(), "bce_pp": _records()}, path)
    assert path.read_bytes()[:5] == b"<?xml"
    with pytest.raises(ValueError):
        save_training_figure({}, tmp_path / "x.svg")


def test_eval_figure_and_rerender_determinism(tmp_path):
    cm = ConfusionMatrix(tp=29, fp=108, tn=2035, fn=2)
    scores = skill_scores(cm)
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    save_eval_figure(cm, scores, a)
    save_eval_figure(cm, scores, b)
    assert a.read_bytes() == b.read_bytes()
    assert b"svg" in a.read_bytes()[:300]
