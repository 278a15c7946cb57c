"""Synthetic magnetogram-like rasters with a learnable class signal.

Real active-region magnetograms are not shipped with this package, so
the generator stands in for them at desk scale.  Each sample is a
bipolar Gaussian flux pair (one positive pole, one negative pole) at a
random position and orientation over a weak noise floor; pole amplitude,
pole width, and the count of strong salt pixels all grow with the flare
subclass ordinal, so total unsigned flux increases monotonically with
subclass and a classifier has something real to learn.  An elliptical
region-of-interest bitmap masks the frame corners, mimicking patch
footprints.

Everything is deterministic: sample i of a generation run draws from a
generator seeded with (seed, region_offset + i), so datasets are
byte-identical across reruns and independent of any worker scheduling.

The module also carries the reference class mix (class frequencies of a
full-solar-cycle active-region survey restricted to +-60 degrees of
disk center) used to proportion the stock benchmark and the balancing
arithmetic, and the tri-monthly month pools that steer regions into the
standard train/val/test partitions.
"""

from __future__ import annotations

import math
from datetime import datetime
from types import MappingProxyType
from typing import Mapping, Sequence, Tuple

import numpy as np

from .ordinal import (
    DEFAULT_THRESHOLD,
    FlareClass,
    ThresholdSpec,
    binarize,
)
from .pipeline import (
    LabeledSample,
    SplitAssignment,
    as_bitmap,
    assign_partitions,
    preprocess,
    validate_sample,
)

__all__ = [
    "REFERENCE_CLASS_MIX",
    "SPLIT_MONTH_POOLS",
    "ALL_MONTHS",
    "synth_raster",
    "synth_bitmap",
    "synth_dataset",
    "scaled_mix",
    "make_benchmark_dataset",
]

# Class frequencies of a full-solar-cycle active-region survey
# (patches within +-60 degrees of disk center, 24 h forecast windows).
# Used to proportion the stock benchmark and to check the balancing
# arithmetic at full scale.
REFERENCE_CLASS_MIX: Mapping[str, Mapping[FlareClass, int]] = MappingProxyType(
    {
        "train": MappingProxyType(
            {
                FlareClass.FQ: 182880,
                FlareClass.A: 19,
                FlareClass.B: 12130,
                FlareClass.C: 18060,
                FlareClass.M: 3168,
                FlareClass.X: 188,
            }
        ),
        "val": MappingProxyType(
            {
                FlareClass.FQ: 92716,
                FlareClass.A: 44,
                FlareClass.B: 6210,
                FlareClass.C: 8191,
                FlareClass.M: 1384,
                FlareClass.X: 154,
            }
        ),
        "test": MappingProxyType(
            {
                FlareClass.FQ: 95770,
                FlareClass.A: 0,
                FlareClass.B: 4472,
                FlareClass.C: 10460,
                FlareClass.M: 1853,
                FlareClass.X: 320,
            }
        ),
    }
)

ALL_MONTHS: Tuple[int, ...] = tuple(range(1, 13))

# Months that land each split's regions in the right tri-monthly
# partitions: {1,2} -> train, 3 -> val, 4 -> test.
SPLIT_MONTH_POOLS: Mapping[str, Tuple[int, ...]] = MappingProxyType(
    {
        "train": (1, 2, 5, 6, 9, 10),
        "val": (3, 7, 11),
        "test": (4, 8, 12),
    }
)


def synth_raster(subclass: FlareClass, size: int, rng: np.random.Generator) -> np.ndarray:
    """Raw field raster (gauss scale, pre-pipeline) for one subclass.

    Expected total unsigned flux grows with the subclass ordinal through
    pole amplitude, pole width, and salt-pixel count.
    """
    if size < 8:
        raise ValueError(f"raster size must be >= 8, got {size}")
    o = int(subclass)
    grid = np.arange(size, dtype=np.float64)
    yy, xx = np.meshgrid(grid, grid, indexing="ij")

    values = rng.normal(0.0, 12.0, (size, size))

    # Bipolar pair: poles of opposite sign separated along a random axis.
    # Amplitude rises geometrically with the ordinal, echoing the
    # decade-per-class flux ladder; the clip stage saturates the strongest
    # cores, so late classes also separate by saturated area.
    amp = 40.0 * 1.6**o
    sigma = size * (0.08 + 0.025 * o)
    cy = rng.uniform(0.32, 0.68) * size
    cx = rng.uniform(0.32, 0.68) * size
    angle = rng.uniform(0.0, 2.0 * np.pi)
    half_gap = 0.22 * size
    dy, dx = half_gap * np.sin(angle), half_gap * np.cos(angle)
    for sign, py, px in ((1.0, cy + dy, cx + dx), (-1.0, cy - dy, cx - dx)):
        values += sign * amp * np.exp(
            -((yy - py) ** 2 + (xx - px) ** 2) / (2.0 * sigma * sigma)
        )

    # Strong salt pixels, count rising with ordinal.
    n_salt = 3 * o * o
    if n_salt:
        rows = rng.integers(0, size, n_salt)
        cols = rng.integers(0, size, n_salt)
        signs = rng.choice((-1.0, 1.0), n_salt)
        values[rows, cols] += signs * (110.0 + 28.0 * o)
    return values


def synth_bitmap(size: int, rng: np.random.Generator) -> np.ndarray:
    """Elliptical region-of-interest mask covering most of the frame."""
    grid = np.arange(size, dtype=np.float64)
    yy, xx = np.meshgrid(grid, grid, indexing="ij")
    ay = rng.uniform(0.40, 0.49) * size
    ax = rng.uniform(0.40, 0.49) * size
    c = (size - 1) / 2.0
    return as_bitmap(((yy - c) / ay) ** 2 + ((xx - c) / ax) ** 2 <= 1.0)


def synth_dataset(
    counts: Mapping[FlareClass, int],
    image_size: int = 512,
    seed: int = 0,
    months: Sequence[int] = ALL_MONTHS,
    region_offset: int = 0,
    start_year: int = 2014,
    threshold: ThresholdSpec = DEFAULT_THRESHOLD,
) -> "list[LabeledSample]":
    """Generate preprocessed labeled samples, `counts[c]` per subclass.

    Samples are emitted grouped by subclass in ordinal order.  Each
    sample owns a fresh region id (region_offset + running index) and a
    timestamp whose month cycles through `months`, which is what steers
    it into a tri-monthly partition.  Fully determined by the argument
    tuple.
    """
    if not months or any(m < 1 or m > 12 for m in months):
        raise ValueError("months must be a nonempty subset of 1..12")
    out: "list[LabeledSample]" = []
    idx = 0
    for cls in FlareClass:
        n = int(counts.get(cls, 0))
        if n < 0:
            raise ValueError(f"count for {cls.name} must be >= 0")
        for _ in range(n):
            rng = np.random.default_rng((seed, region_offset + idx))
            raw = synth_raster(cls, image_size, rng)
            roi = synth_bitmap(image_size, rng)
            image = preprocess(raw, roi, size=image_size)
            ts = datetime(
                start_year,
                months[idx % len(months)],
                1 + (idx * 7) % 28,
                (idx * 5) % 24,
            )
            sample = LabeledSample(
                image=image,
                subclass=cls,
                label=binarize(cls, threshold),
                timestamp=ts,
                region_id=region_offset + idx,
            )
            validate_sample(sample, threshold, expected_size=image_size)
            out.append(sample)
            idx += 1
    return out


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def scaled_mix(scale: int = 50) -> "dict[str, dict[FlareClass, int]]":
    """Reference class mix divided by `scale` (rounded half up)."""
    if scale < 1:
        raise ValueError("scale must be >= 1")
    return {
        role: {cls: _round_half_up(n / scale) for cls, n in mix.items()}
        for role, mix in REFERENCE_CLASS_MIX.items()
    }


def make_benchmark_dataset(
    seed: int = 42,
    scale: int = 50,
    image_size: int = 32,
    threshold: ThresholdSpec = DEFAULT_THRESHOLD,
) -> Tuple["list[LabeledSample]", SplitAssignment]:
    """Three-split synthetic benchmark proportioned like the reference mix.

    Every sample is its own region, and each split draws months from its
    pool, so tri-monthly partitioning reproduces the intended roles with
    exact per-split class counts.
    """
    mixes = scaled_mix(scale)
    samples: "list[LabeledSample]" = []
    offset = 0
    for role in ("train", "val", "test"):
        part = synth_dataset(
            mixes[role],
            image_size=image_size,
            seed=seed,
            months=SPLIT_MONTH_POOLS[role],
            region_offset=offset,
            threshold=threshold,
        )
        samples.extend(part)
        offset += len(part)
    assignment = assign_partitions((s.region_id, s.timestamp) for s in samples)
    return samples, assignment
