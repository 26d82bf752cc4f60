"""Stratified fold assignment and RNG stream derivation."""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray


@dataclass(frozen=True)
class CvPlan:
    outer_folds: int = 3
    inner_folds: int = 5
    seed: int = 0


def stratified_folds(labels: ArrayLike, k: int, seed: int) -> NDArray[np.int64]:
    """Fold index in ``[0, k)`` for every example.

    Each class is shuffled with the seed and dealt round-robin; the deal
    continues across classes so overall fold sizes differ by at most one.
    """
    y = np.asarray(labels).ravel()
    if k < 2:
        raise ValueError("need at least two folds")
    folds = np.empty(y.size, dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xF01D]))
    offset = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if idx.size < k:
            raise ValueError(f"class {cls} has {idx.size} examples, fewer than {k} folds")
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = (offset + np.arange(idx.size)) % k
        offset = (offset + idx.size) % k
    return folds


def derive_seed(seed: int, *keys: int | str) -> int:
    """Deterministic 32-bit seed from a base seed and string/int keys."""
    words = [int(seed) & 0xFFFFFFFF]
    for key in keys:
        words.append(zlib.crc32(key.encode()) if isinstance(key, str) else int(key) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(1)[0])
