import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpt.bloom import (
    BlockedBloomFilter,
    bf_build,
    bf_probe_batch,
    bits_to_selection,
    bits_per_key,
)


def test_empty_filter_probes_false():
    f = bf_build(np.array([], dtype=np.int64))
    assert not bf_probe_batch(f, np.arange(100)).any()


def test_no_false_negatives_1000():
    keys = np.arange(1, 1001)
    f = bf_build(keys)
    assert bf_probe_batch(f, keys).all()


def test_disjoint_fpr_within_slack():
    keys = np.arange(100_000, dtype=np.int64)
    f = bf_build(keys, target_fpr=0.02)
    probes = np.arange(100_000, dtype=np.int64) + 10_000_000
    fpr = bf_probe_batch(f, probes).mean()
    assert fpr <= 0.03


def test_mixed_batch_true_count_lower_bound():
    inserted = np.arange(1024, dtype=np.int64)
    f = bf_build(inserted)
    batch = np.concatenate([inserted, np.arange(1024) + 5_000_000])
    hits = bf_probe_batch(f, batch)
    assert hits[:1024].all()
    assert int(hits.sum()) >= 1024


def test_determinism_same_seed_same_blocks():
    keys = np.arange(5000)
    a = bf_build(keys, hash_seed=123)
    b = bf_build(keys, hash_seed=123)
    assert np.array_equal(a.blocks, b.blocks)
    c = bf_build(keys, hash_seed=124)
    assert not np.array_equal(a.blocks, c.blocks)


def test_composite_keys_no_false_negatives_and_order_sensitive():
    left = np.arange(2000, dtype=np.int64)
    keys = np.stack([left, left * 3 + 1], axis=1)
    f = bf_build(keys)
    assert bf_probe_batch(f, keys).all()
    swapped = keys[:, ::-1]
    # swapped composite keys are distinct keys: mostly misses
    assert bf_probe_batch(f, swapped).mean() < 0.2


@settings(max_examples=25)
@given(
    st.lists(st.integers(-(2**60), 2**60), max_size=200),
    st.lists(st.integers(-(2**60), 2**60), max_size=200),
)
def test_superset_property(inserted, probed):
    f = bf_build(np.array(inserted, dtype=np.int64))
    hits = bf_probe_batch(f, np.array(probed, dtype=np.int64))
    members = np.isin(np.array(probed, dtype=np.int64), np.array(inserted, dtype=np.int64))
    assert (hits | ~members).all()  # member implies hit


@pytest.mark.parametrize("n", [1000, 100_000])
def test_fpr_calibration(n):
    f = bf_build(np.arange(n, dtype=np.int64), target_fpr=0.02)
    probes = np.arange(10 * n, dtype=np.int64) + 2**40
    fpr = bf_probe_batch(f, probes).mean()
    assert 0.0 <= fpr <= 0.04  # within [0, 2 * target]


def test_bits_per_key_monotone():
    assert bits_per_key(0.01) > bits_per_key(0.02) > bits_per_key(0.1)


def test_bits_to_selection_direct():
    bits = np.array([1, 0, 1, 1, 0], dtype=bool)
    assert bits_to_selection(bits).tolist() == [0, 2, 3]


def test_bits_to_selection_all_zero():
    assert bits_to_selection(np.zeros(4, dtype=bool)).tolist() == []


def test_bits_to_selection_identity_on_base():
    base = np.array([3, 7, 9])
    assert bits_to_selection(np.ones(3, dtype=bool), base).tolist() == [3, 7, 9]


def test_bits_to_selection_length_mismatch():
    with pytest.raises(ValueError):
        bits_to_selection(np.ones(3, dtype=bool), np.array([1, 2]))


def test_estimated_fpr_close_to_target():
    f = bf_build(np.arange(10_000), target_fpr=0.02)
    assert 0.001 < f.estimated_fpr() < 0.02
