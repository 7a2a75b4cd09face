"""Numerical kernels: special functions, SPD linear algebra, Student-t, RNG.

Thin wrappers over scipy/numpy primitives, with domain checking and the
error types the rest of the package expects. Pure functions are
thread-safe; each RngStream instance is single-threaded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.special

from .errors import DomainError, NotPositiveDefinite

__all__ = [
    "digamma",
    "ln_gamma",
    "SpdFactor",
    "spd_factorize",
    "student_t_cdf",
    "student_t_quantile",
    "RngStream",
    "rng_stream",
]


def digamma(x):
    """psi(x) for x > 0. Accepts scalars or arrays."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise DomainError("digamma requires x > 0")
    out = scipy.special.digamma(x)
    return float(out) if out.ndim == 0 else out


def ln_gamma(x):
    """ln Gamma(x) for x > 0. Accepts scalars or arrays."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise DomainError("ln_gamma requires x > 0")
    out = scipy.special.gammaln(x)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SpdFactor:
    """Cholesky factor L (lower triangular) of an SPD matrix A = L L^T."""

    lower_triangular: np.ndarray

    @property
    def shape(self):
        return self.lower_triangular.shape

    def solve(self, b: np.ndarray) -> np.ndarray:
        """x with A x = b."""
        return scipy.linalg.cho_solve((self.lower_triangular, True), b)

    def inverse(self) -> np.ndarray:
        eye = np.eye(self.shape[0])
        inv = scipy.linalg.cho_solve((self.lower_triangular, True), eye)
        return 0.5 * (inv + inv.T)  # enforce exact symmetry

    def log_det(self) -> float:
        """ln det A = 2 sum ln diag(L)."""
        return 2.0 * float(np.sum(np.log(np.diag(self.lower_triangular))))


def spd_factorize(A: np.ndarray, sym_tol: float = 1e-12) -> SpdFactor:
    """Cholesky-factorize a symmetric positive definite matrix.

    Raises NotPositiveDefinite when a pivot is non-positive (numerically
    broken precision matrix) and DomainError when A is not symmetric
    within sym_tol (relative to its largest entry).
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > sym_tol * scale:
        raise DomainError("matrix is not symmetric")
    try:
        L = scipy.linalg.cholesky(0.5 * (A + A.T), lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return SpdFactor(lower_triangular=L)


def student_t_cdf(x, dof):
    """CDF of the standardized Student-t with dof degrees of freedom."""
    if np.any(np.asarray(dof) <= 0):
        raise DomainError("dof must be positive")
    out = scipy.special.stdtr(np.asarray(dof, dtype=np.float64), np.asarray(x, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def student_t_quantile(p, dof):
    """Quantile of the standardized Student-t (inverse of student_t_cdf)."""
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(p_arr <= 0) or np.any(p_arr >= 1):
        raise DomainError("p must lie in (0, 1)")
    if np.any(np.asarray(dof) <= 0):
        raise DomainError("dof must be positive")
    out = scipy.special.stdtrit(np.asarray(dof, dtype=np.float64), p_arr)
    return float(out) if np.ndim(out) == 0 else out


class RngStream:
    """Seedable random source: identical seed, identical stream.

    Supports uniform, standard normal, and Gamma(shape, rate) draws. One
    instance is single-threaded; parallel consumers should create streams
    with independent seeds.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, size=None):
        return self._gen.uniform(size=size)

    def normal(self, size=None):
        return self._gen.standard_normal(size=size)

    def gamma(self, shape, rate=1.0, size=None):
        """Gamma draws in the shape/rate parametrization (mean = shape/rate)."""
        if np.any(np.asarray(shape) <= 0) or np.any(np.asarray(rate) <= 0):
            raise DomainError("gamma shape and rate must be positive")
        return self._gen.gamma(shape, 1.0 / np.asarray(rate, dtype=np.float64), size=size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high=high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def spawn(self, key: int) -> "RngStream":
        """Independent stream derived deterministically from (seed, key)."""
        return RngStream((self.seed * 0x9E3779B97F4A7C15 + int(key)) % (2**63))


def rng_stream(seed: int) -> RngStream:
    return RngStream(seed)
