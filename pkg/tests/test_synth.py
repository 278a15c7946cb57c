"""Synthetic raster generator and the stock benchmark dataset."""

import numpy as np
import pytest

from flarepp.ordinal import FlareClass
from flarepp.pipeline import validate_sample
from flarepp.synth import (
    ALL_MONTHS,
    REFERENCE_CLASS_MIX,
    SPLIT_MONTH_POOLS,
    make_benchmark_dataset,
    scaled_mix,
    synth_bitmap,
    synth_dataset,
    synth_raster,
)
from flarepp.trainer import group_by_role


def test_synth_raster_requires_min_size():
    with pytest.raises(ValueError):
        synth_raster(FlareClass.M, 4, np.random.default_rng(0))


def test_synth_raster_deterministic_per_generator_state():
    a = synth_raster(FlareClass.C, 32, np.random.default_rng(5))
    b = synth_raster(FlareClass.C, 32, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_synth_bitmap_shape_and_coverage():
    m = synth_bitmap(64, np.random.default_rng(3))
    assert m.dtype == np.bool_ and m.shape == (64, 64)
    frac = m.mean()
    assert 0.4 < frac < 0.8


def test_unsigned_activity_orders_the_classes():
    # Mean deviation from the scaled zero point must rise strictly with
    # the ordinal, with a clear gap at the >=M split.
    counts = {c: 12 for c in FlareClass}
    samples = synth_dataset(counts, image_size=32, seed=0)
    means = {}
    for c in FlareClass:
        imgs = [s.image for s in samples if s.subclass is c]
        assert len(imgs) == 12
        means[c] = float(np.mean([np.abs(im - 127.5).mean() for im in imgs]))
    ladder = [means[c] for c in FlareClass]
    assert all(lo < hi for lo, hi in zip(ladder, ladder[1:]))
    assert means[FlareClass.M] > 1.5 * means[FlareClass.C]


def test_synth_dataset_structure():
    counts = {FlareClass.FQ: 5, FlareClass.M: 3}
    samples = synth_dataset(counts, image_size=16, seed=2, region_offset=100)
    assert len(samples) == 8
    # Grouped by subclass in ordinal order, region ids run consecutively.
    assert [s.subclass for s in samples] == [FlareClass.FQ] * 5 + [FlareClass.M] * 3
    assert [s.region_id for s in samples] == list(range(100, 108))
    months = [s.timestamp.month for s in samples]
    assert months == list(ALL_MONTHS)[:8]
    for s in samples:
        validate_sample(s, expected_size=16)


def test_synth_dataset_deterministic_and_seed_sensitive():
    counts = {FlareClass.B: 2, FlareClass.X: 2}
    a = synth_dataset(counts, image_size=16, seed=9)
    b = synth_dataset(counts, image_size=16, seed=9)
    c = synth_dataset(counts, image_size=16, seed=10)
    for s1, s2 in zip(a, b):
        assert np.array_equal(s1.image, s2.image)
    assert any(not np.array_equal(s1.image, s3.image) for s1, s3 in zip(a, c))


def test_synth_dataset_respects_month_pool():
    counts = {FlareClass.FQ: 6}
    samples = synth_dataset(counts, image_size=16, seed=0, months=(3, 7, 11))
    assert [s.timestamp.month for s in samples] == [3, 7, 11, 3, 7, 11]


def test_reference_mix_totals():
    train = REFERENCE_CLASS_MIX["train"]
    assert sum(train.values()) == 216445
    assert train[FlareClass.M] + train[FlareClass.X] == 3356
    assert REFERENCE_CLASS_MIX["test"][FlareClass.A] == 0


def test_scaled_mix_rounds_half_up():
    m = scaled_mix(50)
    assert m["train"] == {
        FlareClass.FQ: 3658,
        FlareClass.A: 0,
        FlareClass.B: 243,
        FlareClass.C: 361,
        FlareClass.M: 63,
        FlareClass.X: 4,
    }
    assert sum(m["train"].values()) == 4329
    assert sum(m["val"].values()) == 2174
    assert sum(m["test"].values()) == 2256
    assert scaled_mix(1)["train"] == dict(REFERENCE_CLASS_MIX["train"])
    with pytest.raises(ValueError):
        scaled_mix(0)


def test_benchmark_dataset_roles_and_purity():
    samples, assignment = make_benchmark_dataset(seed=5, scale=2000, image_size=16)
    by_role = group_by_role(samples, assignment)
    mixes = scaled_mix(2000)
    for role in ("train", "val", "test"):
        assert len(by_role[role]) == sum(mixes[role].values())
        pool = set(SPLIT_MONTH_POOLS[role])
        for s in by_role[role]:
            assert s.timestamp.month in pool
    # Every sample owns a distinct region, so no region straddles splits.
    ids = [s.region_id for s in samples]
    assert len(ids) == len(set(ids))


def test_benchmark_dataset_deterministic():
    a, _ = make_benchmark_dataset(seed=5, scale=4000, image_size=16)
    b, _ = make_benchmark_dataset(seed=5, scale=4000, image_size=16)
    assert len(a) == len(b)
    for s1, s2 in zip(a, b):
        assert np.array_equal(s1.image, s2.image)
        assert s1.subclass is s2.subclass
