import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddsalca.sampler import (Dataset, SampleConfig, bits_to_index, bits_to_unit, counter_bits,
                             holdout_split, sample_dataset)
from ddsalca.systems import MountainCar, ZeroOrderHold, linear_benchmark, simulate


def test_counter_bits_are_partition_free():
    ids = np.arange(1000)
    whole = counter_bits(7, ids, 5)
    parts = np.concatenate([counter_bits(7, ids[a:a + 137], 5) for a in range(0, 1000, 137)])
    assert np.array_equal(whole, parts)
    assert not np.array_equal(whole, counter_bits(8, ids, 5))


def test_unit_and_index_ranges():
    b = counter_bits(0, np.arange(20000), 3)
    u = bits_to_unit(b)
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.01
    idx = bits_to_index(b, 3)
    assert set(np.unique(idx).tolist()) == {0, 1, 2}
    assert np.abs(np.bincount(idx.ravel()) / idx.size - 1 / 3).max() < 0.01


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 4), st.integers(1, 2000))
def test_same_data_for_any_worker_count(seed, workers, N):
    sys = linear_benchmark()
    a = sample_dataset(sys, SampleConfig(N, 3, seed, 1), chunk=256)
    b = sample_dataset(sys, SampleConfig(N, 3, seed, workers), chunk=97)
    assert np.array_equal(a.x0, b.x0)
    assert np.array_equal(a.inputs, b.inputs)
    assert np.array_equal(a.outputs, b.outputs)


def test_id_offset_continues_stream():
    sys = linear_benchmark()
    full = sample_dataset(sys, SampleConfig(100, 4, 3))
    tail = sample_dataset(sys, SampleConfig(40, 4, 3, id_offset=60))
    assert np.array_equal(full.outputs[60:], tail.outputs)
    assert tail.ids.tolist() == list(range(60, 100))


def test_records_are_real_trajectories():
    car = ZeroOrderHold(MountainCar(), 5)
    d = sample_dataset(car, SampleConfig(50, 4, 1))
    assert d.x0.shape == (50, 2) and d.outputs.shape == (50, 5) and d.inputs.shape == (50, 4)
    assert np.all(d.x0 >= car.lower) and np.all(d.x0 <= car.upper)
    for i in range(0, 50, 7):
        assert simulate(car, d.x0[i], d.inputs[i]) == d.behavior(i)
    assert d.meta["hold"] == 5 and d.system == "mountaincar"


def test_config_validation():
    with pytest.raises(ValueError):
        SampleConfig(0, 3)
    with pytest.raises(ValueError):
        SampleConfig(1, 0)
    with pytest.raises(ValueError):
        SampleConfig(1, 1, workers=0)


def test_holdout_split():
    d = sample_dataset(linear_benchmark(), SampleConfig(10, 2, 0))
    a, b = holdout_split(d, 4)
    assert a.N == 4 and b.N == 6 and b.ids[0] == 4
    for m in (0, 10):
        with pytest.raises(ValueError):
            holdout_split(d, m)


def test_single_record_and_dataset_checks():
    d = sample_dataset(linear_benchmark(), SampleConfig(1, 4, 0))
    assert d.N == 1 and len(d) == 1
    with pytest.raises(ValueError):
        Dataset.from_behaviors([], ("a",), ("b",))
    with pytest.raises(ValueError):
        Dataset("x", 2, ("a",), ("b",), np.arange(2), np.zeros((3, 1)), np.zeros((2, 2)),
                np.zeros((2, 3)))
