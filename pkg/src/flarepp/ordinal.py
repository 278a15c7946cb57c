"""Flare class taxonomy, flux thresholds, and ordinal proximity weights.

Solar flares are graded by peak soft X-ray flux on a logarithmic ladder
A < B < C < M < X (decade boundaries from 1e-8 to 1e-4 W/m^2); events
with no detectable enhancement are flare-quiet (FQ).  Binary forecasting
splits the six-step ladder at a threshold class such as >=M, and every
subclass keeps a proximity weight grading how close it sits to that
split.  Everything here is immutable after construction and free of
floating-point log calls: exponents are stored as exact small integers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

__all__ = [
    "FlareClass",
    "BinaryLabel",
    "ThresholdSpec",
    "OrdinalWeights",
    "DEFAULT_THRESHOLD",
    "FLUX_FLOORS",
    "class_from_flux",
    "binarize",
    "proximity_weights",
]


class FlareClass(enum.IntEnum):
    """Six-level flare intensity scale; the integer value is the ordinal index."""

    FQ = 0
    A = 1
    B = 2
    C = 3
    M = 4
    X = 5

    @classmethod
    def from_token(cls, token: str) -> "FlareClass":
        """Parse a serialized class token such as "M" or "fq"."""
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown flare class token: {token!r}") from None

    @property
    def token(self) -> str:
        return self.name


class BinaryLabel(enum.IntEnum):
    """Binary forecast target: no-flare (NF) vs flaring (FL)."""

    NF = 0
    FL = 1


# Open lower flux bound of each non-quiet class, W/m^2.  A flux must
# strictly exceed its floor to earn the class; exact boundary values
# resolve downward.
FLUX_FLOORS: Mapping[FlareClass, float] = MappingProxyType(
    {
        FlareClass.X: 1e-4,
        FlareClass.M: 1e-5,
        FlareClass.C: 1e-6,
        FlareClass.B: 1e-7,
        FlareClass.A: 1e-8,
    }
)


def class_from_flux(flux: float) -> FlareClass:
    """Map a peak X-ray flux in W/m^2 to its flare class.

    Parameters
    ----------
    flux : float
        Peak flux, >= 0.  Zero encodes "no detectable emission".

    Returns
    -------
    FlareClass
        The unique class whose open lower bound the flux exceeds, FQ if none.

    Raises
    ------
    ValueError
        If flux is negative.
    """
    if flux < 0:
        raise ValueError(f"peak flux must be >= 0, got {flux!r}")
    for cls in (FlareClass.X, FlareClass.M, FlareClass.C, FlareClass.B, FlareClass.A):
        if flux > FLUX_FLOORS[cls]:
            return cls
    return FlareClass.FQ


@dataclass(frozen=True)
class ThresholdSpec:
    """Binary split point on the class ladder: FL means >= min_positive_class."""

    min_positive_class: FlareClass = FlareClass.M

    def __post_init__(self):
        if self.min_positive_class is FlareClass.FQ:
            raise ValueError("threshold at FQ would leave the NF side empty")

    @classmethod
    def parse(cls, token: str) -> "ThresholdSpec":
        """Parse a config token: ">=M" (canonical) or a bare class name."""
        text = token.strip()
        if text.startswith(">="):
            text = text[2:]
        return cls(FlareClass.from_token(text))

    def __str__(self) -> str:
        return f">={self.min_positive_class.name}"

    @property
    def max_negative_class(self) -> FlareClass:
        """Last class on the NF side of the split."""
        return FlareClass(self.min_positive_class - 1)


DEFAULT_THRESHOLD = ThresholdSpec(FlareClass.M)


def binarize(c: FlareClass, t: ThresholdSpec = DEFAULT_THRESHOLD) -> BinaryLabel:
    """FL iff the class sits at or above the threshold's split point."""
    return BinaryLabel.FL if c >= t.min_positive_class else BinaryLabel.NF


@dataclass(frozen=True)
class OrdinalWeights:
    """Per-class proximity weights beta = 10**log_beta for one threshold.

    The two classes adjacent to the split carry the maximal weight and
    log_beta falls off by one per ordinal step away on either side, so
    within each binary side the weight strictly decreases with distance
    from the split.  For the default >=M threshold this yields the
    reference table beta = {FQ: 10, A: 10^2, B: 10^3, C: 10^4, M: 10^4,
    X: 10^3}.  Exponents are exact ints; beta values are exact int
    powers of ten.
    """

    threshold: ThresholdSpec
    log_beta: Mapping[FlareClass, int]
    beta: Mapping[FlareClass, int]

    def __post_init__(self):
        object.__setattr__(self, "log_beta", MappingProxyType(dict(self.log_beta)))
        object.__setattr__(self, "beta", MappingProxyType(dict(self.beta)))


def proximity_weights(t: ThresholdSpec = DEFAULT_THRESHOLD) -> OrdinalWeights:
    """Build the ordinal proximity weight table for a threshold.

    Let d(c) be the number of ordinal steps between class c and the
    class on c's own side that touches the split (so d = 0 for the two
    classes straddling it), and Wmax = max d + 1.  Then log_beta(c) =
    Wmax - d(c).  The >=M table above is the reference case; other
    thresholds follow the same distance rule.
    """
    pos0 = t.min_positive_class
    neg0 = t.max_negative_class
    dist = {
        c: (c - pos0 if c >= pos0 else neg0 - c)
        for c in FlareClass
    }
    wmax = max(dist.values()) + 1
    log_beta = {c: wmax - d for c, d in dist.items()}
    beta = {c: 10 ** lb for c, lb in log_beta.items()}
    return OrdinalWeights(threshold=t, log_beta=log_beta, beta=beta)
