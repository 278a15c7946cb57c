"""Deterministic data preparation for magnetogram-like rasters.

The preprocessing chain runs in a fixed order:

    clip_flux -> zero_noise -> apply_bitmap -> fit_512 -> scale_0_255

i.e. field values are clipped to +-256 G, the noise band |v| <= 25 G is
zeroed, pixels outside the region-of-interest mask are dropped, the
raster is brought to a fixed square size (zero-padding small inputs,
else choosing the window with the highest total unsigned flux), and the
result is mapped affinely onto [0, 255] without integer quantization.

Labeling follows the "maximum class within the next 24 hours" rule, and
region-level partitioning assigns each active region to one of four
tri-monthly partitions so that no region straddles train/val/test.

Class balancing augments every flaring sample with five deterministic
variants (vertical flip, horizontal flip, bounded uniform noise, 3x3
Gaussian blur, polarity inversion) and undersamples the quiet classes
at fixed rates with a seeded draw.  Every randomized step derives its
generator from (global_seed, sample position), never from worker order,
so results are reproducible and parallelizable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .ordinal import (
    DEFAULT_THRESHOLD,
    BinaryLabel,
    FlareClass,
    ThresholdSpec,
    binarize,
    class_from_flux,
)

__all__ = [
    "FLUX_CLIP",
    "NOISE_BAND",
    "FIT_SIZE",
    "AUGMENT_KINDS",
    "DEFAULT_UNDERSAMPLE_RATES",
    "DEFAULT_ROLES",
    "LabeledSample",
    "SplitAssignment",
    "as_raster",
    "as_bitmap",
    "clip_flux",
    "zero_noise",
    "apply_bitmap",
    "fit_512",
    "fit_to_size",
    "scale_0_255",
    "summed_area_table",
    "window_sums",
    "max_flux_window",
    "preprocess",
    "augment",
    "balanced_counts",
    "balance_training",
    "label_window",
    "assign_partitions",
    "validate_sample",
]

FLUX_CLIP = 256.0       # G; raw magnetogram values are clipped to +-FLUX_CLIP
NOISE_BAND = 25.0       # G; values with |v| <= NOISE_BAND are zeroed
FIT_SIZE = 512          # side of the square raster fed to the model

# Fixed augmentation order; every FL training sample yields the original
# plus one variant per kind.
AUGMENT_KINDS = ("vflip", "hflip", "noise", "blur", "polarity")

# Quiet-side keep rates.  The flare-quiet rate is the exact fraction
# that brings the quiet class to parity with the augmented flaring side
# of the reference training mix ("approximately 6 percent"); the weak
# classes keep 30 percent.
DEFAULT_UNDERSAMPLE_RATES: Mapping[FlareClass, float] = MappingProxyType(
    {
        FlareClass.FQ: 11073 / 182880,
        FlareClass.A: 0.30,
        FlareClass.B: 0.30,
        FlareClass.C: 0.30,
    }
)

DEFAULT_ROLES: Mapping[int, str] = MappingProxyType(
    {1: "train", 2: "train", 3: "val", 4: "test"}
)


def as_raster(values, *, copy: bool = False) -> np.ndarray:
    """Coerce to a finite 2-D float64 grid."""
    arr = np.array(values, dtype=np.float64, copy=copy) if copy else np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"raster must be a nonempty 2-D grid, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("raster values must be finite")
    return arr


def as_bitmap(mask) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.dtype != np.bool_:
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("bitmap entries must be boolean or 0/1")
        arr = arr.astype(bool)
    if arr.ndim != 2:
        raise ValueError(f"bitmap must be 2-D, got shape {arr.shape}")
    return arr


@dataclass(eq=False)
class LabeledSample:
    """One preprocessed raster with its flare label and provenance."""

    image: np.ndarray
    subclass: FlareClass
    label: BinaryLabel
    timestamp: datetime
    region_id: int


def validate_sample(
    s: LabeledSample,
    threshold: ThresholdSpec = DEFAULT_THRESHOLD,
    expected_size: Optional[int] = FIT_SIZE,
) -> None:
    """Check the post-pipeline invariants of a sample; raise ValueError if broken."""
    img = s.image
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValueError(f"sample image must be square, got shape {img.shape}")
    if expected_size is not None and img.shape != (expected_size, expected_size):
        raise ValueError(
            f"sample image must be {expected_size}x{expected_size}, got {img.shape}"
        )
    if img.min() < 0.0 or img.max() > 255.0:
        raise ValueError("sample pixels must lie in [0, 255]")
    if binarize(s.subclass, threshold) != s.label:
        raise ValueError(
            f"label {s.label.name} contradicts subclass {s.subclass.name} "
            f"under threshold {threshold}"
        )


def clip_flux(r) -> np.ndarray:
    """Clamp field values to [-256, 256] G."""
    return np.clip(as_raster(r), -FLUX_CLIP, FLUX_CLIP)


def zero_noise(r) -> np.ndarray:
    """Zero the noise band: |v| <= 25 G becomes 0, larger values pass through."""
    arr = as_raster(r, copy=True)
    arr[np.abs(arr) <= NOISE_BAND] = 0.0
    return arr


def apply_bitmap(r, b) -> np.ndarray:
    """Keep pixels where the region-of-interest mask is true, zero the rest."""
    arr = as_raster(r)
    mask = as_bitmap(b)
    if mask.shape != arr.shape:
        raise ValueError(
            f"bitmap shape {mask.shape} does not match raster shape {arr.shape}"
        )
    return np.where(mask, arr, 0.0)


def summed_area_table(values) -> np.ndarray:
    """Inclusive prefix-sum table S with S[i, j] = sum(values[:i, :j]).

    The returned table has one extra leading row and column of zeros so
    window sums become a four-corner difference.
    """
    arr = as_raster(values)
    h, w = arr.shape
    sat = np.zeros((h + 1, w + 1), dtype=np.float64)
    sat[1:, 1:] = np.cumsum(np.cumsum(arr, axis=0), axis=1)
    return sat


def window_sums(sat: np.ndarray, win_h: int, win_w: int) -> np.ndarray:
    """All win_h x win_w window sums from a summed-area table."""
    if win_h < 1 or win_w < 1:
        raise ValueError("window dimensions must be >= 1")
    h, w = sat.shape[0] - 1, sat.shape[1] - 1
    if win_h > h or win_w > w:
        raise ValueError(
            f"window {win_h}x{win_w} exceeds raster {h}x{w}"
        )
    return (
        sat[win_h:, win_w:]
        - sat[:-win_h, win_w:]
        - sat[win_h:, :-win_w]
        + sat[:-win_h, :-win_w]
    )


def max_flux_window(values, win_h: int, win_w: int) -> Tuple[int, int]:
    """Top-left corner of the window with maximal total unsigned flux.

    Ties resolve to the smallest row index, then the smallest column
    index (row-major argmax order).
    """
    arr = as_raster(values)
    sums = window_sums(summed_area_table(np.abs(arr)), win_h, win_w)
    flat = int(np.argmax(sums))
    return flat // sums.shape[1], flat % sums.shape[1]


def fit_to_size(r, size: int) -> np.ndarray:
    """Bring a raster to size x size.

    Small rasters are zero-padded with the content anchored at the
    top-left corner.  If either dimension exceeds the target, the other
    is padded up to it if needed and the size x size window with the
    highest total unsigned flux is selected.
    """
    arr = as_raster(r)
    h, w = arr.shape
    if h <= size and w <= size:
        out = np.zeros((size, size), dtype=np.float64)
        out[:h, :w] = arr
        return out
    padded = np.zeros((max(h, size), max(w, size)), dtype=np.float64)
    padded[:h, :w] = arr
    r0, c0 = max_flux_window(padded, size, size)
    return padded[r0 : r0 + size, c0 : c0 + size].copy()


def fit_512(r) -> np.ndarray:
    return fit_to_size(r, FIT_SIZE)


def scale_0_255(r) -> np.ndarray:
    """Affine map from [-256, 256] onto [0, 255]; values stay real."""
    arr = as_raster(r)
    if arr.min() < -FLUX_CLIP or arr.max() > FLUX_CLIP:
        raise ValueError(
            "scale_0_255 expects values already clipped to [-256, 256]; "
            "run clip_flux first"
        )
    return (arr + FLUX_CLIP) * 255.0 / 512.0


def preprocess(
    raster,
    bitmap=None,
    size: int = FIT_SIZE,
) -> np.ndarray:
    """Run the full fixed-order raster chain; bitmap=None skips masking."""
    arr = zero_noise(clip_flux(raster))
    if bitmap is not None:
        arr = apply_bitmap(arr, bitmap)
    arr = fit_to_size(arr, size)
    return scale_0_255(arr)


# A 3x3 Gaussian kernel with sigma = 1, normalized to sum exactly 1.
_BLUR_OFFSETS = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]
_BLUR_WEIGHTS = np.array(
    [math.exp(-(dy * dy + dx * dx) / 2.0) for dy, dx in _BLUR_OFFSETS]
)
_BLUR_WEIGHTS /= _BLUR_WEIGHTS.sum()


def _blur3(img: np.ndarray) -> np.ndarray:
    padded = np.pad(img, 1, mode="edge")
    h, w = img.shape
    out = np.zeros_like(img)
    for weight, (dy, dx) in zip(_BLUR_WEIGHTS, _BLUR_OFFSETS):
        out += weight * padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return out


def augment(s: LabeledSample, kind: str, seed=None) -> LabeledSample:
    """One deterministic variant of a flaring sample.

    kinds: vflip, hflip, noise (requires seed; adds uniform values in
    +-25 G mapped through the affine scaling, then re-clamps to
    [0, 255]), blur (3x3 Gaussian, sigma 1, edge-replicate), polarity
    (255 - v, the scaled image of field negation).  Subclass, label and
    provenance are preserved.
    """
    if s.label != BinaryLabel.FL:
        raise ValueError("augmentation is defined for FL samples only")
    img = s.image
    if kind == "vflip":
        out = np.flipud(img).copy()
    elif kind == "hflip":
        out = np.fliplr(img).copy()
    elif kind == "noise":
        if seed is None:
            raise ValueError("noise augmentation requires a seed")
        rng = np.random.default_rng(seed)
        delta = rng.uniform(-NOISE_BAND, NOISE_BAND, img.shape) * 255.0 / 512.0
        out = np.clip(img + delta, 0.0, 255.0)
    elif kind == "blur":
        out = _blur3(img)
    elif kind == "polarity":
        out = 255.0 - img
    else:
        raise ValueError(f"unknown augmentation kind {kind!r}; expected one of {AUGMENT_KINDS}")
    return LabeledSample(
        image=out,
        subclass=s.subclass,
        label=s.label,
        timestamp=s.timestamp,
        region_id=s.region_id,
    )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _check_rates(rates: Mapping[FlareClass, float]) -> None:
    for cls, rate in rates.items():
        if not 0.0 < rate <= 1.0:
            raise ValueError(f"undersample rate for {cls.name} must be in (0, 1], got {rate}")


def balanced_counts(
    counts: Mapping[FlareClass, int],
    undersample_rates: Optional[Mapping[FlareClass, float]] = None,
    threshold: ThresholdSpec = DEFAULT_THRESHOLD,
) -> "dict[FlareClass, int]":
    """Post-balancing count per class, without touching any samples.

    Flaring classes sextuple (original plus five augmented variants);
    quiet classes keep round(rate * n) samples, rounding half up.
    Classes absent from the rate map are kept whole.
    """
    rates = DEFAULT_UNDERSAMPLE_RATES if undersample_rates is None else undersample_rates
    _check_rates(rates)
    out = {}
    for cls, n in counts.items():
        if n < 0:
            raise ValueError(f"count for {cls.name} must be >= 0")
        if binarize(cls, threshold) == BinaryLabel.FL:
            out[cls] = 6 * n
        else:
            out[cls] = _round_half_up(rates.get(cls, 1.0) * n)
    return out


def balance_training(
    samples: Sequence[LabeledSample],
    undersample_rates: Optional[Mapping[FlareClass, float]] = None,
    seed: int = 0,
    threshold: ThresholdSpec = DEFAULT_THRESHOLD,
) -> "list[LabeledSample]":
    """Augment the flaring side and undersample the quiet side.

    Each FL sample is emitted followed by its five variants in the fixed
    AUGMENT_KINDS order; the noise variant derives its generator from
    (seed, sample position).  Each quiet class keeps a seeded uniform
    draw without replacement of round(rate * n) samples, in their
    original order.  Output is fully determined by (samples, rates,
    seed).
    """
    rates = DEFAULT_UNDERSAMPLE_RATES if undersample_rates is None else undersample_rates
    _check_rates(rates)

    by_class: "dict[FlareClass, list[int]]" = {}
    for i, s in enumerate(samples):
        if binarize(s.subclass, threshold) == BinaryLabel.NF:
            by_class.setdefault(s.subclass, []).append(i)

    keep: set = set()
    for cls, positions in by_class.items():
        k = _round_half_up(rates.get(cls, 1.0) * len(positions))
        rng = np.random.default_rng((seed, int(cls)))
        chosen = rng.choice(len(positions), size=k, replace=False)
        keep.update(positions[j] for j in chosen)

    out: "list[LabeledSample]" = []
    for i, s in enumerate(samples):
        if binarize(s.subclass, threshold) == BinaryLabel.FL:
            out.append(s)
            for kind in AUGMENT_KINDS:
                out.append(augment(s, kind, seed=(seed, i) if kind == "noise" else None))
        elif i in keep:
            out.append(s)
    return out


def label_window(
    flare_events: Iterable[Tuple[datetime, float]],
    obs_time: datetime,
    window: timedelta = timedelta(hours=24),
    threshold: ThresholdSpec = DEFAULT_THRESHOLD,
) -> Tuple[FlareClass, BinaryLabel]:
    """Label an observation by the strongest flare in the next `window`.

    Events are (event_time, peak_flux) pairs, expected time-sorted; an
    event counts when obs_time < event_time <= obs_time + window.  No
    event in the window means flare-quiet.
    """
    best = None
    horizon = obs_time + window
    for event_time, flux in flare_events:
        if obs_time < event_time <= horizon:
            if best is None or flux > best:
                best = flux
    subclass = FlareClass.FQ if best is None else class_from_flux(best)
    return subclass, binarize(subclass, threshold)


@dataclass(frozen=True)
class SplitAssignment:
    """Region to partition map plus the partition role table."""

    partition_of: Mapping[int, int]
    roles: Mapping[int, str] = field(default_factory=lambda: DEFAULT_ROLES)

    def __post_init__(self):
        object.__setattr__(self, "partition_of", MappingProxyType(dict(self.partition_of)))
        object.__setattr__(self, "roles", MappingProxyType(dict(self.roles)))

    def partition(self, region_id: int) -> int:
        return self.partition_of[region_id]

    def role_of(self, region_id: int) -> str:
        return self.roles[self.partition_of[region_id]]


def assign_partitions(
    regions: Iterable[Tuple[int, datetime]],
    roles: Mapping[int, str] = DEFAULT_ROLES,
) -> SplitAssignment:
    """Tri-monthly partitioning keyed on each region's first observation.

    partition = ((month - 1) mod 4) + 1, so partition 1 holds
    Jan/May/Sep, 2 Feb/Jun/Oct, 3 Mar/Jul/Nov, 4 Apr/Aug/Dec.  Multiple
    rows for one region are reduced to the earliest timestamp first, so
    a region can never straddle two partitions.
    """
    first_seen: "dict[int, datetime]" = {}
    for region_id, ts in regions:
        held = first_seen.get(region_id)
        if held is None or ts < held:
            first_seen[region_id] = ts
    if not first_seen:
        raise ValueError("no regions to partition")
    partition_of = {
        region_id: ((ts.month - 1) % 4) + 1 for region_id, ts in first_seen.items()
    }
    return SplitAssignment(partition_of=partition_of, roles=roles)
