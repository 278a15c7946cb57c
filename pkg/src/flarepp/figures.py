"""Deterministic SVG figures rendered alongside the delimited outputs.

Every report path that writes a CSV can drop a matching figure next to
it: loss-curve families, training histories, and evaluation summaries.
Rendering is pinned for byte-identical reruns: the Agg backend, a fixed
svg.hashsalt, and no embedded creation date.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .loss import CurveTable
from .metrics import ConfusionMatrix, SkillScores
from .trainer import EpochRecord

__all__ = ["save_curves_figure", "save_training_figure", "save_eval_figure"]

_RC = {
    "svg.hashsalt": "flarepp",
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}

_CLASS_COLORS = {
    "FQ": "#7f7f7f",
    "A": "#1f77b4",
    "B": "#2ca02c",
    "C": "#bcbd22",
    "M": "#ff7f0e",
    "X": "#d62728",
}


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def save_curves_figure(tables: Sequence[CurveTable], path) -> None:
    """One loss-versus-probability panel for a family of curve tables.

    Each subclass's penalized loss is drawn solid; the plain BCE
    envelope for each target appears once, dashed black.
    """
    if not tables:
        raise ValueError("no curve tables to plot")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        seen_targets = set()
        for t in sorted(tables, key=lambda t: int(t.subclass)):
            name = t.subclass.name
            ax.plot(
                t.p, t.loss_bce_pp,
                color=_CLASS_COLORS[name],
                label=f"{name} (target {t.target.name})",
            )
            if t.target not in seen_targets:
                seen_targets.add(t.target)
                ax.plot(
                    t.p, t.loss_bce,
                    color="black", linestyle="--", linewidth=1.0,
                    label=f"bce (target {t.target.name})",
                )
        alpha = tables[0].alpha
        ax.set_xlabel("predicted probability p")
        ax.set_ylabel("loss")
        ax.set_title(f"proximity-penalized bce, alpha={alpha:g}")
        ax.legend(fontsize=7, ncol=2)
        fig.tight_layout()
        _save(fig, path)


def save_training_figure(records_by_loss: Mapping[str, Sequence[EpochRecord]], path) -> None:
    """Loss history (left) and validation skill (right) per loss kind."""
    if not records_by_loss:
        raise ValueError("no epoch records to plot")
    with plt.rc_context(_RC):
        fig, (ax_loss, ax_skill) = plt.subplots(1, 2, figsize=(9.0, 3.6))
        palette = {"bce": "#1f77b4", "bce_pp": "#d62728"}
        for kind, records in records_by_loss.items():
            epochs = [r.epoch for r in records]
            color = palette.get(kind, "#2ca02c")
            ax_loss.plot(epochs, [r.train_loss for r in records], color=color, label=f"{kind} train")
            ax_loss.plot(
                epochs, [r.val_loss for r in records],
                color=color, linestyle="--", label=f"{kind} val",
            )
            ax_skill.plot(epochs, [r.val_css for r in records], color=color, label=f"{kind} val css")
        ax_loss.set_xlabel("epoch")
        ax_loss.set_ylabel("loss")
        ax_loss.legend(fontsize=7)
        ax_skill.set_xlabel("epoch")
        ax_skill.set_ylabel("validation css")
        ax_skill.legend(fontsize=7)
        fig.tight_layout()
        _save(fig, path)


def save_eval_figure(cm: ConfusionMatrix, scores: SkillScores, path) -> None:
    """Annotated confusion matrix with the three skill scores."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.6))
        grid = [[cm.tn, cm.fp], [cm.fn, cm.tp]]
        ax.imshow(grid, cmap="Blues", vmin=0)
        for i, row in enumerate(grid):
            for j, count in enumerate(row):
                ax.text(j, i, f"{count}", ha="center", va="center", fontsize=11)
        ax.set_xticks((0, 1), labels=("pred NF", "pred FL"))
        ax.set_yticks((0, 1), labels=("true NF", "true FL"))
        ax.grid(False)
        ax.set_title(
            f"tss={scores.tss:.4f}  hss={scores.hss:.4f}  css={scores.css:.4f}",
            fontsize=9,
        )
        fig.tight_layout()
        _save(fig, path)
