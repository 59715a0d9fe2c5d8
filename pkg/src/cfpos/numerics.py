"""Numerical kernels shared by the simulator and the estimators.

Hermitian eigendecomposition and Cholesky factorization delegate to LAPACK
through numpy and wrap it with the tolerance checks and jitter policy the
rest of the package relies on. The Bessel functions are evaluated here
directly: an ascending power series on the small-argument range and the
Hankel asymptotic expansion beyond it.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from cfpos.errors import NonHermitianError, NotPSDError

__all__ = [
    "Cholesky",
    "RngStream",
    "bessel_j",
    "cholesky_psd",
    "hermitian_eig",
    "psd_factor",
    "sample_complex_gaussian",
]

HERMITIAN_RTOL = 1e-8
SERIES_LIMIT = 12.0


class Cholesky(NamedTuple):
    factor: np.ndarray
    jitter: float


class RngStream:
    """Seeded random stream identified by ``(seed, stream_id)``.

    The stream is backed by PCG64 seeded through :class:`numpy.random.SeedSequence`
    with ``stream_id`` as the spawn key, so a given pair produces the same
    sequence on every platform. Child streams extend the key and never overlap
    with their parent or siblings.

    A stream is single-owner; hand each concurrent task its own :meth:`child`.
    """

    def __init__(self, seed: int, stream_id: int = 0, _path: tuple[int, ...] = ()):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._path = tuple(int(p) for p in _path)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self._path))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    @property
    def key(self) -> tuple[int, ...]:
        return (self.seed, self.stream_id, *self._path)

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, (*self._path, index))

    def __repr__(self):
        return f"RngStream(key={self.key})"


def _check_hermitian(a: np.ndarray) -> None:
    scale = np.linalg.norm(a, axis=(-2, -1))
    asym = np.linalg.norm(a - np.conj(np.swapaxes(a, -1, -2)), axis=(-2, -1))
    bad = asym > HERMITIAN_RTOL * np.maximum(scale, np.finfo(float).tiny)
    if np.any(bad):
        worst = float(np.max(asym / np.maximum(scale, np.finfo(float).tiny)))
        raise NonHermitianError(
            f"matrix is not Hermitian: relative asymmetry {worst:.3e} > {HERMITIAN_RTOL:g}"
        )


def hermitian_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix (or a stack of them).

    Parameters
    ----------
    a : array_like, shape (..., N, N)
        Hermitian input. Relative asymmetry ``||A - A^H||_F / ||A||_F`` above
        1e-8 is rejected.

    Returns
    -------
    eigenvalues : ndarray, shape (..., N)
        Real eigenvalues in ascending order.
    eigenvectors : ndarray, shape (..., N, N)
        Unit-norm, mutually orthogonal eigenvectors in the columns.
    """
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] < 1:
        raise ValueError(f"expected square matrix with dim >= 1, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    _check_hermitian(a)
    sym = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    return np.linalg.eigh(sym)


def psd_factor(cov) -> np.ndarray:
    """Return F with ``F @ F^H == cov`` for a Hermitian PSD matrix (or stack).

    Built from the eigendecomposition, so rank-deficient covariances are
    handled exactly; slightly negative eigenvalues from rounding are clipped.
    """
    w, v = hermitian_eig(cov)
    return v * np.sqrt(np.clip(w, 0.0, None))[..., None, :]


def cholesky_psd(a, jitter: float = 0.0) -> Cholesky:
    """Lower Cholesky factor of a symmetric PSD matrix with diagonal jitter.

    The factorization is attempted with ``jitter`` first. On failure the jitter
    escalates geometrically (x10) from ``1e-12 * trace/dim`` up to
    ``1e-6 * trace/dim``.

    Returns
    -------
    Cholesky
        ``factor`` with ``factor @ factor.T == a + jitter * I`` and the
        ``jitter`` actually used.

    Raises
    ------
    NotPSDError
        If no jitter up to the cap makes the matrix factorizable.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotPSDError("matrix has non-finite entries", jitter)
    n = a.shape[0]
    scale = max(np.trace(a) / n, 0.0)
    cap = 1e-6 * scale

    schedule = [float(jitter)]
    if scale > 0:
        j = 1e-12 * scale
        while j <= cap * (1 + 1e-9):
            if j > jitter:
                schedule.append(j)
            j *= 10.0
    eye = np.eye(n)
    for j in schedule:
        try:
            return Cholesky(np.linalg.cholesky(a + j * eye if j else a), j)
        except np.linalg.LinAlgError:
            continue
    raise NotPSDError("matrix is not positive semi-definite", schedule[-1])


def _bessel_series(order: int, x: np.ndarray) -> np.ndarray:
    half_sq = -(x / 2.0) ** 2
    term = (x / 2.0) ** order / math.factorial(order)
    total = term.copy()
    for k in range(1, 80):
        term = term * half_sq / (k * (k + order))
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def _bessel_asymptotic(order: int, x: np.ndarray) -> np.ndarray:
    mu = 4.0 * order * order
    chi = x - (0.5 * order + 0.25) * math.pi
    p = np.ones_like(x)
    q = np.zeros_like(x)
    coeff = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 60):
        coeff = coeff * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        mag = np.abs(coeff)
        # asymptotic series: stop each entry once its terms stop shrinking
        active &= (mag < prev) & (mag > 1e-17)
        if not np.any(active):
            break
        sign = (-1) ** (k // 2)
        if k % 2 == 0:
            p = np.where(active, p + sign * coeff, p)
        else:
            q = np.where(active, q + sign * coeff, q)
        prev = np.where(active, mag, prev)
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_j(order: int, x):
    """Bessel function of the first kind, order 0 or 2.

    Accepts scalars or arrays with ``|x| <= 1e4``; returns the same shape.
    """
    if order not in (0, 2):
        raise ValueError(f"only orders 0 and 2 are supported, got {order}")
    xa = np.abs(np.asarray(x, dtype=float))
    if np.any(xa > 1e4):
        raise ValueError("|x| must not exceed 1e4")
    out = np.empty_like(xa)
    small = xa <= SERIES_LIMIT
    if np.any(small):
        out[small] = _bessel_series(order, xa[small])
    if np.any(~small):
        out[~small] = _bessel_asymptotic(order, xa[~small])
    # both supported orders are even functions of x
    return out if out.ndim else float(out)


def sample_complex_gaussian(rng: RngStream, n: int, cov_factor, size=None) -> np.ndarray:
    """Draw ``F @ g`` with ``g`` i.i.d. standard circular complex Gaussian.

    Parameters
    ----------
    rng : RngStream
    n : int
        Length of ``g`` (columns of ``cov_factor``).
    cov_factor : array_like, shape (..., M, n)
        Factor F of the target covariance ``F F^H``.
    size : int, optional
        When given, draw ``size`` independent vectors as the columns of the
        result, which then has shape (..., M, size).
    """
    f = np.asarray(cov_factor)
    if f.shape[-1] != n:
        raise ValueError(f"cov_factor has {f.shape[-1]} columns, expected {n}")
    cols = 1 if size is None else int(size)
    shape = f.shape[:-2] + (n, cols)
    gen = rng.generator
    g = (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / math.sqrt(2.0)
    out = f @ g
    return out[..., 0] if size is None else out
