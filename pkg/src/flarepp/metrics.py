"""Confusion-matrix algebra and forecast skill scores.

Binary flare forecasts are scored with the True Skill Statistic, the
Heidke Skill Score, and their geometric mean:

    TSS = TP/(TP+FN) - FP/(FP+TN)
    HSS = 2*(TP*TN - FN*FP) / (P*(FN+TN) + (TP+FP)*N),  P = TP+FN, N = TN+FP
    CSS = 0 if TSS < 0 or HSS < 0, else sqrt(TSS * HSS)

TSS is insensitive to class imbalance while HSS is not, so a model can
look strong on one and weak on the other; CSS folds both into a single
model-selection key.  HSS products such as 1057 * 102059 overflow 32-bit
arithmetic, so numerators and denominators are accumulated as Python
integers (arbitrary precision) with a single float division at the end.

Scores are undefined when a margin is empty (no positives, or no
negatives); that raises :class:`UndefinedScoreError` rather than
returning a silent zero, because a silent zero would corrupt ranking
during hyperparameter selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

__all__ = [
    "ConfusionMatrix",
    "SkillScores",
    "UndefinedScoreError",
    "confusion_from_predictions",
    "tss",
    "hss",
    "css",
    "skill_scores",
    "selection_key",
    "format_report",
]


class UndefinedScoreError(ValueError):
    """A skill score's denominator is zero for this confusion matrix."""


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts of a binary contingency table; FL is the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise ValueError(f"{name} must be an integer, got {v!r}")
            if v < 0:
                raise ValueError(f"{name} must be >= 0, got {v}")
            object.__setattr__(self, name, int(v))

    @property
    def p(self) -> int:
        """Actual positives, TP + FN."""
        return self.tp + self.fn

    @property
    def n(self) -> int:
        """Actual negatives, TN + FP."""
        return self.tn + self.fp

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        """Merge shard tallies by component-wise addition."""
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return ConfusionMatrix(
            self.tp + other.tp,
            self.fp + other.fp,
            self.tn + other.tn,
            self.fn + other.fn,
        )


@dataclass(frozen=True)
class SkillScores:
    tss: float
    hss: float
    css: float


def confusion_from_predictions(
    targets: Sequence[int],
    scores: Sequence[float],
    cutoff: float = 0.5,
) -> ConfusionMatrix:
    """Tally a confusion matrix from probability scores.

    A sample is predicted FL when its score is >= cutoff (ties go to the
    positive class).

    Parameters
    ----------
    targets : sequence of {0, 1}
        True binary labels, FL = 1.
    scores : sequence of float
        Predicted FL probabilities, same length as targets.
    cutoff : float
        Decision threshold in the open interval (0, 1).
    """
    y = np.asarray(targets, dtype=np.int64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError(
            f"targets and scores must be equal-length vectors, got shapes "
            f"{y.shape} and {s.shape}"
        )
    if y.shape[0] < 1:
        raise ValueError("need at least one sample")
    if not 0.0 < cutoff < 1.0:
        raise ValueError(f"cutoff must lie in (0, 1), got {cutoff!r}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("targets must be 0 or 1")
    pred = s >= cutoff
    pos = y == 1
    return ConfusionMatrix(
        tp=int(np.count_nonzero(pred & pos)),
        fp=int(np.count_nonzero(pred & ~pos)),
        tn=int(np.count_nonzero(~pred & ~pos)),
        fn=int(np.count_nonzero(~pred & pos)),
    )


def tss(cm: ConfusionMatrix) -> float:
    """True Skill Statistic, recall minus false-alarm rate; in [-1, 1]."""
    if cm.p == 0 or cm.n == 0:
        raise UndefinedScoreError(
            f"TSS undefined: P={cm.p}, N={cm.n} (both margins must be nonempty)"
        )
    return cm.tp / cm.p - cm.fp / cm.n


def hss(cm: ConfusionMatrix) -> float:
    """Heidke Skill Score, chance-corrected accuracy; in [-1, 1].

    The numerator and denominator are exact Python integers; only the
    final quotient is floating point.
    """
    num = 2 * (cm.tp * cm.tn - cm.fn * cm.fp)
    den = cm.p * (cm.fn + cm.tn) + (cm.tp + cm.fp) * cm.n
    if den == 0:
        raise UndefinedScoreError("HSS undefined: zero denominator")
    return num / den


def css(cm: ConfusionMatrix) -> float:
    """Composite skill score: sqrt(TSS * HSS), clamped to 0 if either is negative."""
    t = tss(cm)
    h = hss(cm)
    if t < 0 or h < 0:
        return 0.0
    return math.sqrt(t * h)


def skill_scores(cm: ConfusionMatrix) -> SkillScores:
    """All three scores at once; raises UndefinedScoreError like the parts."""
    t = tss(cm)
    h = hss(cm)
    c = 0.0 if (t < 0 or h < 0) else math.sqrt(t * h)
    return SkillScores(tss=t, hss=h, css=c)


def selection_key(scores: SkillScores) -> Tuple[float, float, float]:
    """Ranking key for model selection: CSS first, ties by TSS then HSS."""
    return (scores.css, scores.tss, scores.hss)


def format_report(cm: ConfusionMatrix, scores: SkillScores) -> str:
    """Flat key-value evaluation record; scores carry 4 decimal places."""
    lines = [
        f"tp={cm.tp}",
        f"fp={cm.fp}",
        f"tn={cm.tn}",
        f"fn={cm.fn}",
        f"tss={scores.tss:.4f}",
        f"hss={scores.hss:.4f}",
        f"css={scores.css:.4f}",
    ]
    return "\n".join(lines) + "\n"
