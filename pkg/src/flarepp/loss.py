"""Binary cross-entropy and its ordinal proximity-penalized variant.

The penalized loss multiplies each sample's BCE term by
alpha * log10(beta[subclass]) before reduction, so mislabeling a sample
whose true subclass sits next to the binary split costs more than
mislabeling one far from it.  Both losses are defined on probabilities
p = sigmoid(z) but always computed from logits through softplus
identities,

    per-sample BCE = max(z, 0) - z*y + log1p(exp(-|z|)),

so saturated logits never reach log(0).  With alpha = 0.25 the penalized
loss coincides with plain BCE on the maximally weighted subclasses
(multiplier 0.25 * 4 = 1), and with alpha = 1 on the minimally weighted
one; both products are exact in binary floating point.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ordinal import (
    DEFAULT_THRESHOLD,
    BinaryLabel,
    FlareClass,
    OrdinalWeights,
    ThresholdSpec,
    binarize,
    proximity_weights,
)

__all__ = [
    "LossConfig",
    "LossBatch",
    "CurveTable",
    "sigmoid",
    "bce",
    "bce_pp",
    "bce_grad",
    "bce_pp_grad",
    "loss_curve",
    "log_beta_array",
]

_REDUCTIONS = ("mean", "sum", "none")

# Documented tuning range for alpha; values outside it are legal but
# warn, since the coincidence identities anchoring the loss scale to
# plain BCE hold only inside it.
ALPHA_RANGE = (0.25, 1.0)


def log_beta_array(weights: OrdinalWeights) -> np.ndarray:
    """Exponent lookup indexed by ordinal class index, as float64."""
    return np.array([float(weights.log_beta[c]) for c in FlareClass])


@dataclass
class LossConfig:
    """Scaling factor, proximity weights, and default reduction."""

    alpha: float = 0.75
    weights: OrdinalWeights = field(default_factory=proximity_weights)
    reduction: str = "mean"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha!r}")
        if not ALPHA_RANGE[0] <= self.alpha <= ALPHA_RANGE[1]:
            warnings.warn(
                f"alpha={self.alpha} is outside the recommended range "
                f"[{ALPHA_RANGE[0]}, {ALPHA_RANGE[1]}]",
                stacklevel=2,
            )
        if self.reduction not in _REDUCTIONS:
            raise ValueError(f"reduction must be one of {_REDUCTIONS}")
        self._log_beta = log_beta_array(self.weights)


@dataclass(eq=False)
class LossBatch:
    """Aligned logits, binary targets, and true subclasses for one batch.

    Target/subclass consistency under the threshold is checked once at
    construction so the loss functions stay branch-free; arrays are
    frozen read-only afterwards.
    """

    logits: np.ndarray
    targets: np.ndarray
    subclasses: np.ndarray
    threshold: ThresholdSpec = DEFAULT_THRESHOLD

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.int64)
        subclasses = np.asarray(
            [int(c) for c in np.atleast_1d(np.asarray(self.subclasses))],
            dtype=np.int64,
        )
        if logits.ndim != 1 or targets.ndim != 1 or subclasses.ndim != 1:
            raise ValueError("batch vectors must be one-dimensional")
        n = logits.shape[0]
        if n < 1:
            raise ValueError("batch must contain at least one sample")
        if targets.shape[0] != n or subclasses.shape[0] != n:
            raise ValueError(
                f"batch vectors disagree on length: logits {n}, "
                f"targets {targets.shape[0]}, subclasses {subclasses.shape[0]}"
            )
        if not np.all(np.isfinite(logits)):
            raise ValueError("logits must be finite")
        if not np.isin(targets, (0, 1)).all():
            raise ValueError("targets must be 0 (NF) or 1 (FL)")
        if subclasses.min() < 0 or subclasses.max() > int(FlareClass.X):
            raise ValueError("subclass index out of range")
        expected = (subclasses >= int(self.threshold.min_positive_class)).astype(np.int64)
        if not np.array_equal(expected, targets):
            bad = int(np.nonzero(expected != targets)[0][0])
            raise ValueError(
                f"target {targets[bad]} at position {bad} contradicts subclass "
                f"{FlareClass(int(subclasses[bad])).name} under threshold {self.threshold}"
            )
        for arr in (logits, targets, subclasses):
            arr.setflags(write=False)
        self.logits, self.targets, self.subclasses = logits, targets, subclasses

    def __len__(self) -> int:
        return self.logits.shape[0]


def sigmoid(z):
    """Numerically stable logistic function, elementwise.

    Never exponentiates a positive argument, so large |z| saturates to
    exactly 0.0 or 1.0 without overflow instead of raising or producing
    inf.  Scalar input returns a float, array input an array.
    """
    arr = np.asarray(z, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    e = np.exp(arr[~pos])
    out[~pos] = e / (1.0 + e)
    if np.isscalar(z) or arr.ndim == 0:
        return float(out)
    return out


def _per_sample_bce(batch: LossBatch) -> np.ndarray:
    z, y = batch.logits, batch.targets
    return np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))


def _reduce(per: np.ndarray, reduction: str):
    if reduction == "mean":
        return float(per.sum() / per.shape[0])
    if reduction == "sum":
        return float(per.sum())
    if reduction == "none":
        return per
    raise ValueError(f"reduction must be one of {_REDUCTIONS}")


def bce(batch: LossBatch, reduction: str = "mean"):
    """Binary cross-entropy over a batch, computed in logit space."""
    return _reduce(_per_sample_bce(batch), reduction)


def _multiplier(batch: LossBatch, cfg: LossConfig) -> np.ndarray:
    if cfg.weights.threshold != batch.threshold:
        raise ValueError(
            f"weight table built for threshold {cfg.weights.threshold} but "
            f"batch was validated under {batch.threshold}"
        )
    return cfg.alpha * cfg._log_beta[batch.subclasses]


def bce_pp(batch: LossBatch, cfg: LossConfig, reduction: Optional[str] = None):
    """Proximity-penalized BCE.

    Per-sample loss is alpha * BCE_i * log10(beta[subclass_i]); the
    multiplier is applied inside the sum, and mean reduction divides by
    the batch size.
    """
    if reduction is None:
        reduction = cfg.reduction
    return _reduce(_multiplier(batch, cfg) * _per_sample_bce(batch), reduction)


def bce_grad(batch: LossBatch, reduction: str = "mean") -> np.ndarray:
    """d(loss)/d(logit_i) for the reduced BCE; (p_i - y_i)/N under mean."""
    g = sigmoid(batch.logits) - batch.targets
    if reduction == "mean":
        return g / len(batch)
    if reduction in ("sum", "none"):
        return g
    raise ValueError(f"reduction must be one of {_REDUCTIONS}")


def bce_pp_grad(batch: LossBatch, cfg: LossConfig, reduction: Optional[str] = None) -> np.ndarray:
    """d(loss)/d(logit_i) for the reduced penalized loss."""
    if reduction is None:
        reduction = cfg.reduction
    return _multiplier(batch, cfg) * bce_grad(batch, reduction)


@dataclass(frozen=True, eq=False)
class CurveTable:
    """Loss-versus-probability table for one (subclass, target, alpha)."""

    subclass: FlareClass
    target: BinaryLabel
    alpha: float
    p: np.ndarray
    loss_bce: np.ndarray
    loss_bce_pp: np.ndarray


def loss_curve(
    subclass: FlareClass,
    target: BinaryLabel,
    cfg: LossConfig,
    grid: Sequence[float],
) -> CurveTable:
    """Evaluate BCE and penalized BCE on a probability grid for plotting.

    The grid must stay inside the open interval (0, 1): the curve is the
    probability-space loss, which diverges at the endpoints.
    """
    p = np.asarray(grid, dtype=np.float64)
    if p.size == 0:
        raise ValueError("probability grid is empty")
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("grid probabilities must lie strictly inside (0, 1)")
    y = float(target)
    base = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    mult = cfg.alpha * float(cfg.weights.log_beta[subclass])
    return CurveTable(
        subclass=subclass,
        target=target,
        alpha=cfg.alpha,
        p=p,
        loss_bce=base,
        loss_bce_pp=mult * base,
    )
