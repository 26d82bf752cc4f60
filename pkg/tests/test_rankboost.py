import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from metabrank.core import auc_pairwise
from metabrank.rankboost import (
    BoostedRanker,
    PairDistribution,
    ThresholdRanker,
    fit_rankboost,
    score_boosted,
    update_distribution,
)

from conftest import make_dataset


def brute_update(W, h0, h1, alpha):
    out = np.empty_like(W)
    for i in range(W.shape[0]):
        for j in range(W.shape[1]):
            out[i, j] = W[i, j] * math.exp(alpha * (h0[i] - h1[j]))
    return out / out.sum(), out.sum()


class TestDistribution:
    def test_uniform(self):
        D = PairDistribution.uniform(3, 4)
        assert D.weights.shape == (3, 4) and D.weights.sum() == pytest.approx(1.0)

    def test_alpha_zero_and_constant_ranker(self):
        D = PairDistribution.uniform(3, 2)
        D2, Z = update_distribution(D, [1, 0, 1], [0, 1], 0.0)
        assert Z == pytest.approx(1.0) and np.allclose(D2.weights, D.weights)
        D3, Z3 = update_distribution(D, [1, 1, 1], [1, 1], 2.0)
        assert Z3 == pytest.approx(1.0) and np.allclose(D3.weights, D.weights)

    def test_three_by_two_oracle(self):
        D = PairDistribution.uniform(3, 2)
        h0, h1, a = np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0]), 0.7
        D2, Z = update_distribution(D, h0, h1, a)
        want, z = brute_update(D.weights, h0, h1, a)
        # two pairs correct, one wrong, three tied
        assert z == pytest.approx((2 * math.exp(-a) + math.exp(a) + 3) / 6)
        assert Z == pytest.approx(z) and np.allclose(D2.weights, want, atol=1e-15)

    @given(st.integers(0, 2 ** 20), st.floats(-3, 3))
    def test_update_matches_loop(self, seed, alpha):
        rng = np.random.default_rng(seed)
        W = rng.random((4, 5))
        D = PairDistribution(W / W.sum())
        h0, h1 = rng.random(4), rng.random(5)
        D2, Z = update_distribution(D, h0, h1, alpha)
        want, z = brute_update(D.weights, h0, h1, alpha)
        assert abs(D2.weights.sum() - 1) <= 1e-12
        assert np.allclose(D2.weights, want, rtol=1e-12, atol=0)
        assert Z == pytest.approx(z, rel=1e-12)

    def test_overflow(self):
        with pytest.raises(FloatingPointError, match="overflow"):
            update_distribution(PairDistribution.uniform(1, 1), [1.0], [0.0], 1e4)

    def test_invalid(self):
        with pytest.raises(ValueError, match="sum"):
            PairDistribution(np.ones((2, 2)))
        with pytest.raises(ValueError):
            PairDistribution(np.array([[1.5, -0.5]]))
        with pytest.raises(ValueError, match="shape"):
            update_distribution(PairDistribution.uniform(2, 2), [0, 1, 0], [1, 1], 1.0)


class TestModel:
    def test_score_examples(self):
        m = BoostedRanker([ThresholdRanker(0, 0.0, 1), ThresholdRanker(1, 1.0, -1)], [0.5, 2.0], 2)
        assert score_boosted(m, [1.0, 0.0]) == 2.5
        assert score_boosted(m, [-1.0, 3.0]) == 0.0
        assert m.score(np.array([[1.0, 3.0], [-1.0, 1.0]])).tolist() == [0.5, 2.0]
        assert m.truncated(1).score([1.0, 0.0]) == 0.5

    def test_serialization(self, rng):
        X = rng.normal(size=(60, 4))
        m = fit_rankboost(make_dataset(X, np.where(X[:, 1] > 0, 1, -1)), T=15, n_candidate_features=2, seed=3)
        back = BoostedRanker.from_dict(json.loads(json.dumps(m.to_dict())))
        assert np.array_equal(back.score(X), m.score(X))
        assert back.to_dict() == m.to_dict()

    def test_dimension_check(self):
        m = BoostedRanker([ThresholdRanker(0, 0.0, 1)], [1.0], 2)
        with pytest.raises(ValueError):
            m.score(np.zeros((3, 5)))


class TestTraining:
    def test_separable_one_dim(self, rng):
        x = rng.normal(size=(50, 1))
        ds = make_dataset(x, np.where(x[:, 0] > 0.3, 1, -1))
        m = fit_rankboost(ds, T=5, n_candidate_features=1)
        assert auc_pairwise(m.score(x), ds.labels) == 1.0

    @given(st.integers(0, 2 ** 20))
    def test_training_error_bound_and_invariants(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(40, 3))
        y = np.where(X[:, 0] + rng.normal(size=40) > 0, 1, -1)
        if abs(y.sum()) == y.size:
            return
        ds = make_dataset(X, y)
        trace: list = []
        m = fit_rankboost(ds, T=20, n_candidate_features=3, seed=seed, trace=trace)
        assert all(a >= 0 for a in m.alphas)
        assert all(abs(D.weights.sum() - 1) <= 1e-12 for D in trace)
        prod = np.cumprod(m.z_values)
        assert np.all(np.asarray(m.z_values) <= 1 + 1e-12)
        assert np.all(np.diff(prod) <= 1e-12)
        # ranking loss of the combined scorer (ties count as errors) is at most prod Z
        for T in (1, 5, 20):
            s = m.truncated(T).score(X)
            misranked = np.mean(s[y == 1][None, :] <= s[y == -1][:, None])
            assert misranked <= prod[T - 1] + 1e-12

    def test_correct_pairs_lose_weight(self, rng):
        X = rng.normal(size=(30, 2))
        ds = make_dataset(X, np.where(X[:, 0] + 0.5 * rng.normal(size=30) > 0, 1, -1))
        trace: list = []
        m = fit_rankboost(ds, T=1, n_candidate_features=2, trace=trace)
        h = m.rankers[0]
        neg, pos = X[ds.labels == -1], X[ds.labels == 1]
        dh = h(neg)[:, None] - h(pos)[None, :]
        before = 1.0 / dh.size
        after = trace[0].weights
        assert np.all(after[dh < 0] < before) and np.all(after[dh > 0] > before)

    def test_truncation_equals_shorter_run(self, rng):
        X = rng.normal(size=(60, 5))
        ds = make_dataset(X, np.where(X[:, 0] - X[:, 3] > 0, 1, -1))
        long = fit_rankboost(ds, T=30, n_candidate_features=2, seed=11)
        short = fit_rankboost(ds, T=10, n_candidate_features=2, seed=11)
        assert long.truncated(10).to_dict() == short.to_dict()

    def test_constant_features(self):
        ds = make_dataset(np.ones((6, 2)), [1, -1, 1, -1, 1, -1])
        m = fit_rankboost(ds, T=3, n_candidate_features=2)
        assert m.alphas == [0.0, 0.0, 0.0]

    def test_errors(self):
        with pytest.raises(ValueError, match="both classes"):
            fit_rankboost(make_dataset(np.zeros((3, 1)), [1, 1, 1]))
        with pytest.raises(ValueError, match="T must"):
            fit_rankboost(make_dataset(np.arange(4.0)[:, None], [1, -1, 1, -1]), T=0)
