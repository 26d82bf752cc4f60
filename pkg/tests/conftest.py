import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from metabrank.core import LabeledDataset

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_dataset(X, y, names=None) -> LabeledDataset:
    return LabeledDataset.from_arrays(np.asarray(X, dtype=float), np.asarray(y), names)


def brute_auc(scores, labels) -> float:
    """Pair-loop AUC with ties counted one half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == -1]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def separable_linear(n: int, d: int, seed: int) -> LabeledDataset:
    """Two classes split by a margin along a random direction."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=d)
    w /= np.linalg.norm(w)
    X = rng.normal(size=(n, d))
    y = np.where(rng.random(n) < 0.5, 1, -1)
    X -= np.outer(X @ w, w)
    X += np.outer(y * (1.0 + rng.exponential(0.5, size=n)), w)
    return make_dataset(X, y)


def concentric_circles(n: int, seed: int, noise: float = 0.05) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1, -1)
    r = np.where(y == 1, 0.5, 1.5) + noise * rng.normal(size=n)
    t = rng.uniform(0, 2 * np.pi, size=n)
    return make_dataset(np.column_stack([r * np.cos(t), r * np.sin(t)]), y)


def haar_basis(N: int, J: int) -> np.ndarray:
    """Rows are the orthonormal Haar functions in flatten order."""
    rows = []
    support = 2 ** J
    for k in range(N // support):
        v = np.zeros(N)
        v[k * support:(k + 1) * support] = 1.0 / np.sqrt(support)
        rows.append(v)
    for _ in range(J):
        half = support // 2
        for k in range(N // support):
            v = np.zeros(N)
            v[k * support:k * support + half] = 1.0 / np.sqrt(support)
            v[k * support + half:(k + 1) * support] = -1.0 / np.sqrt(support)
            rows.append(v)
        support //= 2
    return np.array(rows)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
