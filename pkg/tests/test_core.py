import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from metabrank.core import (
    LabeledDataset,
    RocCurve,
    as_batch,
    auc,
    auc_from_roc,
    auc_pairwise,
    kendall_tau,
    roc_curve,
)

from conftest import brute_auc


def labels_and_scores(max_n=60, tie_levels=None):
    @st.composite
    def strategy(draw):
        n = draw(st.integers(2, max_n))
        y = draw(st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n))
        if all(v == y[0] for v in y):
            y[0] = -y[0]
        if tie_levels:
            s = draw(st.lists(st.integers(0, tie_levels), min_size=n, max_size=n))
        else:
            s = draw(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=n, max_size=n))
        return np.asarray(s, dtype=float), np.asarray(y)
    return strategy()


class TestLabeledDataset:
    def test_valid(self):
        ds = LabeledDataset(np.zeros((3, 2)), np.array([1, -1, 1]), ("a", "b"))
        assert (ds.n_examples, ds.n_features, ds.n_positive, ds.n_negative) == (3, 2, 2, 1)

    @pytest.mark.parametrize("labels", [[1, 0, 1], [1, 2, -1]])
    def test_bad_labels(self, labels):
        with pytest.raises(ValueError, match="-1 or \\+1"):
            LabeledDataset(np.zeros((3, 2)), np.array(labels), ("a", "b"))

    def test_duplicate_names(self):
        with pytest.raises(ValueError, match="distinct"):
            LabeledDataset(np.zeros((2, 2)), np.array([1, -1]), ("a", "a"))

    def test_name_count(self):
        with pytest.raises(ValueError, match="feature names"):
            LabeledDataset(np.zeros((2, 2)), np.array([1, -1]), ("a",))

    def test_nonfinite(self):
        X = np.array([[0.0, np.inf], [1.0, 2.0]])
        with pytest.raises(ValueError, match="non-finite"):
            LabeledDataset(X, np.array([1, -1]), ("a", "b"))

    def test_immutable_arrays(self):
        ds = LabeledDataset.from_arrays(np.ones((2, 2)), [1, -1])
        with pytest.raises(ValueError):
            ds.features[0, 0] = 5.0
        assert ds.feature_names == ("f0", "f1")

    def test_subset_and_select(self):
        ds = LabeledDataset.from_arrays(np.arange(6.0).reshape(3, 2), [1, -1, 1], ["x", "y"])
        sub = ds.subset([2, 2, 0])
        assert sub.labels.tolist() == [1, 1, 1]
        assert sub.features[:, 0].tolist() == [4.0, 4.0, 0.0]
        sel = ds.select_features([1])
        assert sel.feature_names == ("y",) and sel.features[:, 0].tolist() == [1.0, 3.0, 5.0]

    def test_require_both_classes(self):
        ds = LabeledDataset.from_arrays(np.zeros((2, 1)), [1, 1])
        with pytest.raises(ValueError, match="both classes"):
            ds.require_both_classes()

    def test_as_batch(self):
        X, single = as_batch([1.0, 2.0], 2)
        assert single and X.shape == (1, 2)
        with pytest.raises(ValueError, match="dimension 3"):
            as_batch(np.zeros((4, 2)), 3)


class TestRoc:
    def test_perfect(self):
        c = roc_curve([2, 1], [1, -1])
        assert c.points == [(0, 0), (0, 1), (1, 1)]
        assert auc_from_roc(c) == 1.0

    def test_inverted(self):
        c = roc_curve([1, 2], [1, -1])
        assert c.points == [(0, 0), (1, 0), (1, 1)]
        assert auc_from_roc(c) == 0.0

    def test_all_tied_is_diagonal(self):
        c = roc_curve([1, 1, 1, 1], [1, -1, 1, -1])
        assert c.points == [(0, 0), (1, 1)]
        assert auc_from_roc(c) == 0.5

    def test_thresholds_descend_from_inf(self):
        c = roc_curve([0.3, 0.9, 0.3, 0.1], [1, 1, -1, -1])
        assert np.isinf(c.thresholds[0])
        assert c.thresholds[1:].tolist() == [0.9, 0.3, 0.1]

    @pytest.mark.parametrize("labels", [[1, 1], [-1, -1]])
    def test_single_class(self, labels):
        with pytest.raises(ValueError, match="single class"):
            roc_curve([1, 2], labels)

    def test_invalid_curve(self):
        with pytest.raises(ValueError):
            RocCurve(np.array([0.0, 0.5]), np.array([0.0, 1.0]), np.array([np.inf, 1.0]))
        with pytest.raises(ValueError):
            RocCurve(np.array([0.0, 0.6, 0.4, 1.0]), np.zeros(4) + [0, 0, 0, 1], np.arange(4.0))

    def test_csv_round_trip(self, tmp_path):
        c = roc_curve([0.5, 0.2, 0.2, 0.9], [1, -1, 1, -1])
        path = tmp_path / "roc.csv"
        c.to_csv(path)
        with open(path) as fh:
            assert next(csv.reader(fh)) == ["threshold", "fpr", "tpr"]
        back = RocCurve.from_csv(path)
        assert back.points == c.points
        assert np.array_equal(back.thresholds, c.thresholds)

    @given(labels_and_scores(tie_levels=4))
    def test_invariants(self, sy):
        s, y = sy
        c = roc_curve(s, y)
        assert c.points[0] == (0.0, 0.0) and c.points[-1] == (1.0, 1.0)
        assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)
        assert len(c.points) == np.unique(s).size + 1


class TestAuc:
    def test_examples(self):
        assert auc_pairwise([3, 2, 1], [1, -1, -1]) == 1.0
        assert auc_pairwise([1, 1], [1, -1]) == 0.5
        assert auc([3, 2, 1], [-1, 1, 1]) == 0.0

    def test_random_matches_brute_force(self, rng):
        s = rng.normal(size=50)
        y = np.where(rng.random(50) < 0.4, 1, -1)
        assert auc_pairwise(s, y) == brute_auc(s, y)

    def test_errors(self):
        with pytest.raises(ValueError, match="single class"):
            auc_pairwise([1, 2, 3], [1, 1, 1])
        with pytest.raises(ValueError, match="scores but"):
            auc_pairwise([1, 2], [1, -1, 1])

    @given(labels_and_scores(tie_levels=3))
    def test_two_routes_agree_with_ties(self, sy):
        s, y = sy
        assert abs(auc_pairwise(s, y) - auc_from_roc(roc_curve(s, y))) <= 1e-12

    @given(labels_and_scores())
    def test_two_routes_agree(self, sy):
        s, y = sy
        assert abs(auc_pairwise(s, y) - auc_from_roc(roc_curve(s, y))) <= 1e-12

    @given(labels_and_scores(tie_levels=5))
    def test_negation_antisymmetry(self, sy):
        s, y = sy
        assert auc_pairwise(-s, y) == pytest.approx(1.0 - auc_pairwise(s, y), abs=1e-15)

    @given(labels_and_scores(tie_levels=6))
    def test_monotone_transform_invariance(self, sy):
        s, y = sy
        assert auc_pairwise(np.exp(s / 2.0) + 3.0, y) == auc_pairwise(s, y)


class TestKendall:
    def test_identical_and_reversed(self):
        a = np.array([5.0, 1.0, 3.0, 2.0, 4.0])
        assert kendall_tau(a, a) == 1.0
        assert kendall_tau(a, -a) == -1.0

    def test_one_swap(self):
        # pairs of (1,2,3,4) vs (1,3,2,4): only (2,3) is discordant
        assert kendall_tau([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(4 / 6)

    def test_ties_discarded(self):
        # pair (0,1) tied in b is ignored; remaining 2 pairs concordant
        assert kendall_tau([1, 2, 3], [1, 1, 2]) == 1.0

    def test_errors(self):
        with pytest.raises(ValueError, match="length"):
            kendall_tau([1, 2], [1, 2, 3])
        with pytest.raises(ValueError, match="tied"):
            kendall_tau([1, 1, 1], [1, 2, 3])

    @given(st.lists(st.integers(0, 5), min_size=3, max_size=25), st.randoms(use_true_random=False))
    def test_bounded_and_matches_pair_loop(self, a, rnd):
        b = a[:]
        rnd.shuffle(b)
        P = Q = 0
        for i in range(len(a)):
            for j in range(i + 1, len(a)):
                x = (a[i] - a[j]) * (b[i] - b[j])
                P += x > 0
                Q += x < 0
        if P + Q == 0:
            return
        tau = kendall_tau(a, b)
        assert -1.0 <= tau <= 1.0
        assert tau == (P - Q) / (P + Q)
