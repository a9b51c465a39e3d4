"""Centered multivariate normal: density, characteristic function, sampling."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .covparam import (
    CovCoords,
    CovMatrix,
    CovMultiindex,
    SymMatrix,
    flatten,
    omega_pack,
    parallel_weight,
    validate_pd,
)
from .errors import DimensionMismatch, InvalidParameter

LOG_2PI = math.log(2.0 * math.pi)
SAMPLE_CHUNK = 1 << 16
WORKERS_ENV = "GAUSSPRICE_WORKERS"


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """N(0, cov) with the log normalizing constant cached."""

    cov: CovMatrix
    log_norm: float = field(init=False)

    def __post_init__(self):
        logdet = 2.0 * float(np.sum(np.log(np.diag(self.cov.chol))))
        object.__setattr__(self, "log_norm", -0.5 * (self.n * LOG_2PI + logdet))

    @classmethod
    def from_matrix(cls, sigma) -> "GaussianModel":
        if isinstance(sigma, CovMatrix):
            return cls(sigma)
        if not isinstance(sigma, SymMatrix):
            sigma = SymMatrix(np.asarray(sigma, dtype=float))
        return cls(validate_pd(sigma))

    @property
    def n(self) -> int:
        return self.cov.n

    @property
    def sigma(self) -> np.ndarray:
        return self.cov.data

    def _points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n,):
            raise DimensionMismatch(f"expected points with last axis {self.n}, got shape {x.shape}")
        return x

    def quad_form(self, x) -> np.ndarray:
        """<x, Sigma^{-1} x> as |L^{-1} x|^2, by triangular solve."""
        x = self._points(x)
        flat = x.reshape(-1, self.n).T
        y = solve_triangular(self.cov.chol, flat, lower=True)
        return np.sum(y * y, axis=0).reshape(x.shape[:-1])

    def log_density(self, x) -> np.ndarray:
        return self.log_norm - 0.5 * self.quad_form(x)

    def density(self, x) -> np.ndarray:
        return np.exp(self.log_density(x))

    def characteristic(self, xi) -> np.ndarray:
        xi = self._points(xi)
        q = np.einsum("...i,ij,...j->...", xi, self.sigma, xi)
        return np.exp(-0.5 * q)

    def sample(self, seed: int, count: int) -> np.ndarray:
        return sample(self, seed, count)


def density(m: GaussianModel, x) -> np.ndarray:
    return m.density(x)


def characteristic(m: GaussianModel, xi) -> np.ndarray:
    return m.characteristic(xi)


def characteristic_deriv(A: CovCoords, beta: CovMultiindex, xi) -> np.ndarray:
    """Partial derivative in the coordinates A of xi -> exp(-<xi, Omega(A) xi>/2).

    Equals ``(-1)**|beta| * (1/2)**|beta|_par * xi**flat(beta) * psi(xi)``.
    """
    if beta.n != A.n:
        raise DimensionMismatch("beta and A have different dimensions")
    m = GaussianModel(validate_pd(omega_pack(A)))
    xi = m._points(xi)
    psi = m.characteristic(xi)
    powers = np.asarray(flatten(beta))
    mono = np.prod(xi ** powers, axis=-1)
    sign = -1.0 if beta.order % 2 else 1.0
    return sign * 0.5 ** parallel_weight(beta) * mono * psi


def _chunk_normals(seed: int, chunk: int, rows: int, n: int) -> np.ndarray:
    # one Philox stream per (seed, chunk): sample k is a function of (seed, k) only
    gen = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, chunk]))
    return gen.standard_normal((rows, n))


def standard_normals(seed: int, count: int, n: int) -> np.ndarray:
    if count < 1:
        raise InvalidParameter(f"count must be >= 1, got {count}")
    starts = range(0, count, SAMPLE_CHUNK)
    jobs = [(seed, k, min(SAMPLE_CHUNK, count - s), n) for k, s in enumerate(starts)]
    workers = worker_count()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _chunk_normals(*a), jobs))
    else:
        parts = [_chunk_normals(*a) for a in jobs]
    return np.concatenate(parts, axis=0)


def sample(m: GaussianModel, seed: int, count: int) -> np.ndarray:
    """``count`` draws of L z, shape (count, n); deterministic in ``seed``."""
    z = standard_normals(seed, count, m.n)
    return z @ m.cov.chol.T
