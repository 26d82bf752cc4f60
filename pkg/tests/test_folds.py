import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from metabrank.folds import derive_seed, stratified_folds


def test_one_of_each_class_per_fold():
    y = np.array([1] * 5 + [-1] * 5)
    f = stratified_folds(y, 5, seed=0)
    for k in range(5):
        assert sorted(y[f == k].tolist()) == [-1, 1]


def test_same_seed_same_folds():
    y = np.where(np.arange(40) % 3 == 0, 1, -1)
    assert np.array_equal(stratified_folds(y, 3, 7), stratified_folds(y, 3, 7))
    assert not np.array_equal(stratified_folds(y, 3, 7), stratified_folds(y, 3, 8))


def test_biobank_split_counts():
    y = np.array([1] * 268 + [-1] * 387)
    f = stratified_folds(y, 3, seed=11)
    assert sorted(int(np.sum(y[f == k] == 1)) for k in range(3)) in ([89, 89, 90], [89, 90, 90])


def test_small_class():
    with pytest.raises(ValueError, match="fewer than"):
        stratified_folds(np.array([1, 1, -1, -1, -1]), 3, 0)


@given(st.integers(3, 200), st.integers(2, 7), st.floats(0.1, 0.9), st.integers(0, 1000))
def test_stratification_bounds(n, k, rate, seed):
    n_pos = max(k, min(n - k, int(round(rate * n))))
    if n - n_pos < k:
        return
    y = np.array([1] * n_pos + [-1] * (n - n_pos))
    f = stratified_folds(y, k, seed)
    sizes = np.bincount(f, minlength=k)
    assert sizes.max() - sizes.min() <= 1
    for cls in (1, -1):
        counts = np.bincount(f[y == cls], minlength=k)
        assert np.all(np.abs(counts - np.sum(y == cls) / k) < 1)


def test_derive_seed_keys():
    a = derive_seed(0, "raw", "RB", 1)
    assert a == derive_seed(0, "raw", "RB", 1)
    assert len({a, derive_seed(0, "raw", "RB", 2), derive_seed(1, "raw", "RB", 1), derive_seed(0, "pca", "RB", 1)}) == 4
