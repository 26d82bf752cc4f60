"""Periodized orthonormal discrete wavelet transforms (Haar, Db4, Db8).

``Db4``/``Db8`` name the Daubechies filters by *length* (2 and 4 vanishing
moments respectively).  Filters are built by spectral factorization of the
Daubechies polynomial rather than copied from a table, and
:func:`check_filter` verifies the defining conditions.

Coefficients are laid out the way :func:`flatten` returns them: the
approximation coefficients first, then the detail bands from coarsest to
finest.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from math import comb, log2

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .data import pad_pow2


class WaveletFamily(str, Enum):
    HAAR = "haar"
    DB4 = "db4"
    DB8 = "db8"

    @property
    def vanishing_moments(self) -> int:
        return {"haar": 1, "db4": 2, "db8": 4}[self.value]

    @property
    def filter_length(self) -> int:
        return 2 * self.vanishing_moments


@lru_cache(maxsize=None)
def _daubechies_lowpass(moments: int) -> tuple[float, ...]:
    # roots of sum_k C(M-1+k, k) y^k with y = (2 - z - 1/z) / 4; keep |z| < 1
    poly = np.poly1d([1.0])
    for _ in range(moments):
        poly = poly * np.poly1d([1.0, 1.0])
    if moments > 1:
        coeffs = [comb(moments - 1 + k, k) for k in range(moments)]
        for y in np.roots(coeffs[::-1]):
            c = 1.0 - 2.0 * y
            r = np.sqrt(c * c - 1.0 + 0j)
            z = c + r if abs(c + r) < 1.0 else c - r
            poly = poly * np.poly1d([1.0, -z])
    h = np.real(poly.coeffs)
    h = h * np.sqrt(2.0) / h.sum()
    return tuple(float(v) for v in h)


def lowpass_filter(family: WaveletFamily | str) -> NDArray[np.float64]:
    """Scaling (lowpass) filter ``h`` of the family."""
    family = WaveletFamily(family)
    return np.array(_daubechies_lowpass(family.vanishing_moments))


def highpass_filter(family: WaveletFamily | str) -> NDArray[np.float64]:
    """Wavelet filter ``g_k = (-1)^k h_{L-1-k}``."""
    h = lowpass_filter(family)
    L = h.size
    return np.array([(-1) ** k * h[L - 1 - k] for k in range(L)])


def check_filter(family: WaveletFamily | str, tol: float = 1e-10) -> None:
    """Raise ``ValueError`` if the filter violates its defining conditions.

    Checks ``sum h = sqrt(2)``, ``sum h_k h_{k+2m} = delta_m`` (which gives
    ``sum h^2 = 1``) and ``sum_k k^m g_k = 0`` for ``m`` below the number of
    vanishing moments.
    """
    family = WaveletFamily(family)
    h = lowpass_filter(family)
    L = h.size
    if abs(h.sum() - np.sqrt(2.0)) > tol:
        raise ValueError(f"{family.value}: sum(h) = {h.sum()!r}")
    for m in range(L // 2):
        val = float(np.dot(h[: L - 2 * m], h[2 * m :]))
        if abs(val - (1.0 if m == 0 else 0.0)) > tol:
            raise ValueError(f"{family.value}: shift-{2 * m} autocorrelation {val!r}")
    g = highpass_filter(family)
    k = np.arange(L, dtype=float)
    for m in range(family.vanishing_moments):
        moment = float(np.sum(k**m * g))
        if abs(moment) > tol * max(1.0, float(np.sum(k**m))):
            raise ValueError(f"{family.value}: moment {m} = {moment!r}")


@dataclass(frozen=True)
class WaveletSpec:
    family: WaveletFamily
    levels: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", WaveletFamily(self.family))
        if int(self.levels) < 1:
            raise ValueError("levels must be >= 1")
        object.__setattr__(self, "levels", int(self.levels))


@dataclass(frozen=True)
class WaveletCoefficients:
    """Multilevel decomposition of one signal or a batch of signals.

    ``approx`` has shape ``(..., N / 2**J)``; ``details[j]`` has shape
    ``(..., N / 2**(J - j))`` so ``details[0]`` is the coarsest band and
    ``details[-1]`` the finest.
    """

    approx: NDArray[np.float64]
    details: tuple[NDArray[np.float64], ...]
    original_length: int

    @property
    def levels(self) -> int:
        return len(self.details)

    @property
    def signal_length(self) -> int:
        return self.approx.shape[-1] + sum(d.shape[-1] for d in self.details)

    def flatten(self) -> NDArray[np.float64]:
        return flatten(self)


def _as_rows(x: ArrayLike) -> tuple[NDArray[np.float64], bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    return (x[None, :] if single else x), single


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def _analysis_step(x: NDArray, h: NDArray, g: NDArray) -> tuple[NDArray, NDArray]:
    N = x.shape[-1]
    base = 2 * np.arange(N // 2)
    a = np.zeros(x.shape[:-1] + (N // 2,))
    d = np.zeros_like(a)
    for n in range(h.size):
        xs = x[..., (base + n) % N]
        a += h[n] * xs
        d += g[n] * xs
    return a, d


def _synthesis_step(a: NDArray, d: NDArray, h: NDArray, g: NDArray) -> NDArray:
    half = a.shape[-1]
    N = 2 * half
    x = np.zeros(a.shape[:-1] + (N,))
    base = 2 * np.arange(half)
    for n in range(h.size):
        # adjoint of the analysis step; indices are distinct for a fixed n
        x[..., (base + n) % N] += h[n] * a + g[n] * d
    return x


def dwt(signal: ArrayLike, spec: WaveletSpec, original_length: int | None = None) -> WaveletCoefficients:
    """Pyramid decomposition with periodic boundary extension.

    ``signal`` may be one signal or a 2-D batch (one signal per row); its
    length must be a power of two with ``spec.levels <= log2(length)``.
    """
    x, single = _as_rows(signal)
    N = x.shape[-1]
    if not _is_pow2(N):
        raise ValueError(f"signal length {N} is not a power of two")
    if spec.levels > int(log2(N)):
        raise ValueError(f"{spec.levels} levels too many for length {N}")
    h = lowpass_filter(spec.family)
    g = highpass_filter(spec.family)
    details = []
    a = x
    for _ in range(spec.levels):
        a, d = _analysis_step(a, h, g)
        details.append(d[0] if single else d)
    return WaveletCoefficients(
        approx=a[0] if single else a,
        details=tuple(reversed(details)),
        original_length=N if original_length is None else int(original_length),
    )


def idwt(coeffs: WaveletCoefficients, spec: WaveletSpec) -> NDArray[np.float64]:
    """Inverse of :func:`dwt` (returns the padded-length signal)."""
    if coeffs.levels != spec.levels:
        raise ValueError(f"coefficients have {coeffs.levels} bands, spec says {spec.levels}")
    a, single = _as_rows(coeffs.approx)
    size = a.shape[-1]
    for band in coeffs.details:
        d, _ = _as_rows(band)
        if d.shape[-1] != size:
            raise ValueError(f"detail band of length {d.shape[-1]}, expected {size}")
        size *= 2
    h = lowpass_filter(spec.family)
    g = highpass_filter(spec.family)
    for band in coeffs.details:
        d, _ = _as_rows(band)
        a = _synthesis_step(a, d, h, g)
    return a[0] if single else a


def flatten(coeffs: WaveletCoefficients) -> NDArray[np.float64]:
    """Concatenate approximation then detail bands, coarse to fine."""
    return np.concatenate([coeffs.approx, *coeffs.details], axis=-1)


def unflatten(flat: ArrayLike, like: WaveletCoefficients) -> WaveletCoefficients:
    """Inverse of :func:`flatten` using the band layout of ``like``."""
    flat = np.asarray(flat, dtype=float)
    sizes = [like.approx.shape[-1]] + [d.shape[-1] for d in like.details]
    if flat.shape[-1] != sum(sizes):
        raise ValueError(f"expected {sum(sizes)} coefficients, got {flat.shape[-1]}")
    parts = np.split(flat, np.cumsum(sizes)[:-1], axis=-1)
    return WaveletCoefficients(parts[0], tuple(parts[1:]), like.original_length)


def band_labels(signal_length: int, spec: WaveletSpec) -> list[str]:
    """Names for the flattened coefficients, e.g. ``haar_mu_0``, ``haar_d3_5``.

    Detail band ``dj`` is resolution level ``j`` (``d0`` coarsest).
    """
    prefix = spec.family.value
    n_approx = signal_length >> spec.levels
    names = [f"{prefix}_mu_{k}" for k in range(n_approx)]
    size = n_approx
    for j in range(spec.levels):
        names.extend(f"{prefix}_d{j}_{k}" for k in range(size))
        size *= 2
    return names


def filter_top_n(coeffs: WaveletCoefficients, n_keep: int) -> WaveletCoefficients:
    """Keep the ``n_keep`` largest-magnitude coefficients and zero the rest.

    The approximation coefficients compete with the details.  Among equal
    magnitudes the lower flattened index wins.  Batches are filtered row by
    row.
    """
    flat = flatten(coeffs)
    total = flat.shape[-1]
    if not 0 <= n_keep <= total:
        raise ValueError(f"n_keep must be in [0, {total}], got {n_keep}")
    rows, single = _as_rows(flat)
    order = np.argsort(-np.abs(rows), axis=-1, kind="stable")
    keep = np.zeros_like(rows, dtype=bool)
    np.put_along_axis(keep, order[:, :n_keep], True, axis=-1)
    kept = np.where(keep, rows, 0.0)
    return unflatten(kept[0] if single else kept, coeffs)


def reconstruction_error(original: ArrayLike, reconstructed: ArrayLike) -> float:
    """Frobenius norm of ``original - reconstructed``."""
    A = np.asarray(original, dtype=float)
    B = np.asarray(reconstructed, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.sqrt(np.sum((A - B) ** 2)))


def filter_error_curve(
    signals: ArrayLike, spec: WaveletSpec, n_keep_values: ArrayLike
) -> NDArray[np.float64]:
    """Reconstruction error of top-N filtering for each ``n_keep``.

    ``signals`` are raw rows; they are padded with :func:`pad_pow2` and the
    error is measured on the padded signal, the one the coefficients
    represent exactly.  Restricted to the original span the error can rise
    when a coefficient whose support straddles the border is added.
    """
    X, _ = _as_rows(signals)
    padded, _ = pad_rows(X)
    coeffs = dwt(padded, spec, original_length=X.shape[1])
    errors = []
    for n_keep in np.asarray(n_keep_values, dtype=int):
        recon = idwt(filter_top_n(coeffs, int(n_keep)), spec)
        errors.append(reconstruction_error(padded, recon))
    return np.array(errors)


def pad_rows(X: NDArray) -> tuple[NDArray[np.float64], int]:
    """Apply :func:`pad_pow2` to every row; returns the padded rows and the
    offset of the original values."""
    d = X.shape[1]
    padded = np.array([pad_pow2(row) for row in X]).reshape(X.shape[0], -1)
    front = (padded.shape[1] - d) // 2
    return padded, front


def wavelet_features(spectra: ArrayLike, spec: WaveletSpec) -> tuple[NDArray[np.float64], list[str]]:
    """Flattened coefficient vectors for each spectrum row, plus names."""
    X, _ = _as_rows(spectra)
    padded, _ = pad_rows(X)
    coeffs = dwt(padded, spec, original_length=X.shape[1])
    return flatten(coeffs), band_labels(padded.shape[1], spec)
