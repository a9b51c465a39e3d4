"""Pairing of generalized functions against the Gaussian density.

``pair(g, m)`` evaluates the integral of the function part of ``g`` against
the N(0, Sigma) density plus the density-weighted sum over its singular part.
Each tensor term is expanded over "function or point mass" per coordinate.
Coordinates pinned by point masses contribute their marginal density; the
remaining coordinates are integrated against the conditional Gaussian.

Two integration schemes are available for the free coordinates:

* ``GaussHermiteWhitened``: substitute ``y = mu + L u`` and use a tensor
  probabilists' Gauss-Hermite rule in ``u``.  Exact for polynomials of
  total degree below ``2 * order``.
* ``RectangleRestricted``: split every axis at the recorded breakpoints,
  truncate at 12 conditional standard deviations and use composite
  Gauss-Legendre against the explicit density in all but one coordinate.
  The last coordinate is integrated in closed form through truncated
  normal moments, so jumps across it cost nothing.

``auto`` uses Gauss-Hermite when every free factor is a single polynomial.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import ndtr

from .covparam import CovMatrix, CovMultiindex, index_pairs, pair_index
from .errors import (
    AtomsNotSampleable,
    DimensionMismatch,
    InvalidParameter,
    NodeBudgetExceeded,
    NotPositiveDefinite,
    OrderTooLarge,
)
from .gaussian import LOG_2PI, GaussianModel, sample
from .nonlinearity import GeneralizedFunction, Univariate
from .quadrature import MAX_ORDER, gauss_hermite, legendre_on_cells, tensor_grid

GH = "GaussHermiteWhitened"
RECT = "RectangleRestricted"
AUTO = "auto"
SCHEMES = (AUTO, GH, RECT)

NODE_BUDGET = 10**7
TRUNCATION_SDS = 12.0
MAX_ISSERLIS_ORDER = 12
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureSpec:
    order_per_axis: int
    scheme: str = AUTO

    def __post_init__(self):
        if not 2 <= self.order_per_axis <= MAX_ORDER:
            raise InvalidParameter(f"order_per_axis must be in [2, {MAX_ORDER}], got {self.order_per_axis}")
        if self.scheme not in SCHEMES:
            raise InvalidParameter(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")


def default_quadrature(n: int) -> QuadratureSpec:
    if n <= 2:
        return QuadratureSpec(60)
    if n == 3:
        return QuadratureSpec(30)
    raise InvalidParameter(f"no default quadrature for n={n}; use pair_mc or pass an explicit QuadratureSpec")


@dataclass(frozen=True)
class Estimate:
    """A value with an error proxy.

    For quadrature ``err`` is the change against the next lower order; for
    Monte Carlo it is the standard error of the mean.
    """

    value: float | complex
    method: str
    err: float
    samples: int | None = None

    def __post_init__(self):
        if not self.err >= 0:
            raise InvalidParameter(f"err must be nonnegative, got {self.err}")
        if self.method == "MonteCarlo" and (self.samples is None or self.samples < 2):
            raise InvalidParameter("Monte Carlo estimates need at least 2 samples")

    def scaled(self, c: float) -> "Estimate":
        return Estimate(self.value * c, self.method, self.err * abs(c), self.samples)

    def to_json(self) -> dict:
        out = {"value": None, "method": self.method, "err": float(self.err), "samples": self.samples}
        if isinstance(self.value, complex):
            out["value"] = float(self.value.real)
            out["value_imag"] = float(self.value.imag)
        else:
            out["value"] = float(self.value)
        return out


# truncated-normal moments

def _phi(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        out = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return np.where(np.isfinite(z), out, 0.0)


def _z_pow_phi(z: np.ndarray, k: int) -> np.ndarray:
    fin = np.isfinite(z)
    zz = np.where(fin, z, 0.0)
    return np.where(fin, zz**k * _phi(zz), 0.0)


def _normal_mass(za: np.ndarray, zb: np.ndarray) -> np.ndarray:
    # P(za < Z < zb), evaluated on the side of the smaller tail
    upper = za > 0
    return np.where(upper, ndtr(-za) - ndtr(-zb), ndtr(zb) - ndtr(za))


def _standard_moments(za: np.ndarray, zb: np.ndarray, kmax: int) -> list[np.ndarray]:
    """M_k = integral of z**k phi(z) over (za, zb), k = 0..kmax."""
    M = [_normal_mass(za, zb)]
    if kmax >= 1:
        M.append(_phi(za) - _phi(zb))
    for k in range(2, kmax + 1):
        M.append((k - 1) * M[k - 2] + _z_pow_phi(za, k - 1) - _z_pow_phi(zb, k - 1))
    return M


def interval_expectation(u: Univariate, mean: np.ndarray, sd: float) -> np.ndarray:
    """E[u.fn(Y)] for Y ~ N(mean, sd**2), exactly, vectorized over ``mean``."""
    mean = np.asarray(mean, dtype=float)
    total = np.zeros_like(mean)
    for a, b, coefs in u.intervals():
        if not any(coefs):
            continue
        deg = len(coefs) - 1
        za = (a - mean) / sd
        zb = (b - mean) / sd
        M = _standard_moments(za, zb, deg)
        # coefficients of the piece in z, where y = mean + sd * z
        for k in range(deg + 1):
            d_k = np.zeros_like(mean)
            for j in range(k, deg + 1):
                if coefs[j]:
                    d_k = d_k + coefs[j] * math.comb(j, k) * mean ** (j - k)
            total = total + d_k * sd**k * M[k]
    return total


# free-coordinate integration

def _cells(edges: list[float], lo: float, hi: float, width: float) -> np.ndarray:
    pts = sorted({lo, hi, *(e for e in edges if lo < e < hi)})
    out = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        k = max(1, math.ceil((b - a) / width))
        out.extend(a + (b - a) * np.arange(1, k + 1) / k)
    out[-1] = hi
    return np.asarray(out)


def _layer_points(center: float, inner_width: float, outer_width: float) -> list[float]:
    # geometric refinement around a thin transition layer of width inner_width
    pts = [center]
    d = inner_width
    while d < outer_width:
        pts += [center - d, center + d]
        d *= 2.0
    return pts


def _expect_gh(factors: Sequence[Univariate], mean: np.ndarray, C: np.ndarray, order: int) -> float:
    m = len(factors)
    L = np.linalg.cholesky(C)
    x, w = gauss_hermite(order)
    u, wt = tensor_grid(x, w, m)
    y = mean + u @ L.T
    vals = np.ones(len(wt))
    for k, f in enumerate(factors):
        vals *= f.fn(y[:, k])
    return float(np.sum(wt * vals))


def _expect_rect(factors: Sequence[Univariate], mean: np.ndarray, C: np.ndarray, order: int) -> float:
    m = len(factors)
    if m == 1:
        return float(interval_expectation(factors[0], mean[0], math.sqrt(C[0, 0])))
    # integrate the factor with the most breaks exactly, the rest by Gauss-Legendre cells
    inner = max(range(m), key=lambda k: (len(factors[k].breaks), k))
    outer = [k for k in range(m) if k != inner]
    C_oo = C[np.ix_(outer, outer)]
    c_oi = C[outer, inner]
    fac = cho_factor(C_oo, lower=True)
    slope = cho_solve(fac, c_oi)
    var = C[inner, inner] - float(c_oi @ slope)
    if not var > 0:
        raise NotPositiveDefinite("conditional variance is not positive")
    sd_inner = math.sqrt(var)
    radius = TRUNCATION_SDS * math.sqrt(float(np.max(np.diag(C))))

    axes_x, axes_w = [], []
    for pos, k in enumerate(outer):
        width = math.sqrt(C[k, k])
        edges = list(factors[k].breaks)
        if len(outer) == 1 and abs(slope[0]) > 0:
            # inner mean crosses an inner break where mean_i + slope * (x - mean_o) = b
            layer = sd_inner / abs(slope[0])
            if layer < width:
                for b in factors[inner].breaks:
                    center = mean[k] + (b - mean[inner]) / slope[0]
                    edges += _layer_points(center, layer, width)
        edges_arr = _cells(edges, mean[k] - radius, mean[k] + radius, width)
        x, w = legendre_on_cells(edges_arr, order)
        axes_x.append(x)
        axes_w.append(w)
    grids = np.meshgrid(*axes_x, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*axes_w, indexing="ij")
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    if pts.shape[0] > NODE_BUDGET:
        raise NodeBudgetExceeded(f"{pts.shape[0]} outer nodes exceed the budget {NODE_BUDGET}")

    dev = pts - mean[outer]
    L_o = fac[0] if fac[1] else fac[0].T
    L_o = np.tril(L_o)
    white = solve_triangular(L_o, dev.T, lower=True)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L_o))))
    dens = np.exp(-0.5 * (len(outer) * LOG_2PI + logdet) - 0.5 * np.sum(white * white, axis=0))
    vals = wts * dens
    for pos, k in enumerate(outer):
        vals = vals * factors[k].fn(pts[:, pos])
    cond_mean = mean[inner] + dev @ slope
    vals = vals * interval_expectation(factors[inner], cond_mean, sd_inner)
    return float(np.sum(vals))


def _expect(factors, mean, C, order, scheme) -> float:
    smooth = all(f.is_smooth for f in factors)
    if scheme == GH or (scheme == AUTO and smooth):
        return _expect_gh(factors, mean, C, order)
    return _expect_rect(factors, mean, C, order)


def _pair_value(g: GeneralizedFunction, sigma: np.ndarray, order: int, scheme: str):
    n = g.n
    conditionals: dict[tuple[int, ...], tuple] = {}

    def conditional(S: tuple[int, ...]):
        # marginal Cholesky on S and the regression of the free coordinates on S
        if S not in conditionals:
            R = [k for k in range(n) if k not in S]
            S_l = list(S)
            fac = cho_factor(sigma[np.ix_(S_l, S_l)], lower=True)
            L_s = np.tril(fac[0])
            logdet = 2.0 * float(np.sum(np.log(np.diag(L_s))))
            if R:
                K = cho_solve(fac, sigma[np.ix_(S_l, R)]).T
                C = sigma[np.ix_(R, R)] - K @ sigma[np.ix_(S_l, R)]
                C = 0.5 * (C + C.T)
            else:
                K, C = None, None
            conditionals[S] = (R, L_s, logdet, K, C)
        return conditionals[S]

    total = 0.0
    for term in g.terms:
        options = []
        for f in term.factors:
            opts = [None] if f.has_fn else []
            opts += list(f.atoms)
            options.append(opts)
        for combo in itertools.product(*options):
            S = tuple(k for k, c in enumerate(combo) if c is not None)
            weight = term.coef * math.prod(c[1] for c in combo if c is not None)
            if not S:
                val = _expect(term.factors, np.zeros(n), sigma, order, scheme)
            else:
                R, L_s, logdet, K, C = conditional(S)
                x_s = np.array([combo[k][0] for k in S])
                white = solve_triangular(L_s, x_s, lower=True)
                dens = math.exp(-0.5 * (len(S) * LOG_2PI + logdet) - 0.5 * float(white @ white))
                if not R:
                    val = dens
                else:
                    free = [term.factors[k] for k in R]
                    val = dens * _expect(free, K @ x_s, C, order, scheme)
            total = total + weight * val
    return total


def pair(g: GeneralizedFunction, m: GaussianModel, q: QuadratureSpec | None = None) -> Estimate:
    """Deterministic pairing of ``g`` with the density of ``m``."""
    if g.n != m.n:
        raise DimensionMismatch(f"nonlinearity has n={g.n}, model has n={m.n}")
    q = q or default_quadrature(g.n)
    if q.order_per_axis**g.n > NODE_BUDGET:
        raise NodeBudgetExceeded(f"order {q.order_per_axis}^{g.n} nodes exceed the budget {NODE_BUDGET}")
    if g.is_zero:
        return Estimate(0.0, "Quadrature", 0.0)
    hi = _pair_value(g, m.sigma, q.order_per_axis, q.scheme)
    lo = _pair_value(g, m.sigma, q.order_per_axis - 1, q.scheme)
    return Estimate(hi, "Quadrature", float(abs(hi - lo)))


def pair_mc(g: GeneralizedFunction, m: GaussianModel, seed: int, count: int) -> Estimate:
    """Plain Monte Carlo mean of the function part over ``sample(m, seed, count)``."""
    if g.n != m.n:
        raise DimensionMismatch(f"nonlinearity has n={g.n}, model has n={m.n}")
    if g.is_singular:
        raise AtomsNotSampleable(f"{g.label} has point masses, which sampling never hits")
    if count < 2:
        raise InvalidParameter("Monte Carlo needs count >= 2")
    vals = g(sample(m, seed, count))
    mean = np.mean(vals)
    if np.iscomplexobj(vals):
        sd = math.sqrt(np.var(vals.real, ddof=1) + np.var(vals.imag, ddof=1))
        mean = complex(mean)
    else:
        sd = float(np.std(vals, ddof=1))
        mean = float(mean)
    return Estimate(mean, "MonteCarlo", sd / math.sqrt(count), count)


# Isserlis / Wick oracle

def _pairings(items: list[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        for tail in _pairings(rest[:i] + rest[i + 1:]):
            yield [(first, other)] + tail


@lru_cache(maxsize=None)
def isserlis_polynomial(n: int, gamma: tuple[int, ...]) -> dict[tuple[int, ...], int]:
    """E[X**gamma] as a polynomial in the upper-triangle covariance coordinates.

    Keys are exponent vectors over the index pairs (storage order of
    :func:`gaussprice.covparam.index_pairs`); values are integer counts of
    perfect matchings of the label multiset.
    """
    gamma = tuple(int(g) for g in gamma)
    if len(gamma) != n:
        raise DimensionMismatch("gamma has the wrong length")
    order = sum(gamma)
    if order > MAX_ISSERLIS_ORDER:
        raise OrderTooLarge(f"|gamma| = {order} exceeds {MAX_ISSERLIS_ORDER}")
    if order % 2:
        return {}
    labels = [k for k, g in enumerate(gamma) for _ in range(g)]
    poly: Counter = Counter()
    size = len(index_pairs(n))
    for matching in _pairings(labels):
        expo = [0] * size
        for a, b in matching:
            expo[pair_index(n, a, b)] += 1
        poly[tuple(expo)] += 1
    return dict(poly)


def poly_derivative(poly: dict, beta: CovMultiindex) -> dict:
    out = {}
    for expo, c in poly.items():
        if all(e >= b for e, b in zip(expo, beta.counts)):
            factor = math.prod(math.perm(e, b) for e, b in zip(expo, beta.counts))
            new = tuple(e - b for e, b in zip(expo, beta.counts))
            out[new] = out.get(new, 0) + c * factor
    return out


def poly_evaluate(poly: dict, coords: np.ndarray) -> float:
    return math.fsum(c * math.prod(float(v) ** e for v, e in zip(coords, expo)) for expo, c in poly.items())


def isserlis_moment(sigma: CovMatrix | np.ndarray, gamma: Sequence[int]) -> float:
    """Exact E[X**gamma] for X ~ N(0, sigma) by summing over perfect matchings."""
    S = sigma.data if isinstance(sigma, CovMatrix) else np.asarray(sigma, dtype=float)
    n = S.shape[0]
    poly = isserlis_polynomial(n, tuple(gamma))
    coords = np.array([S[i, j] for i, j in index_pairs(n)])
    return poly_evaluate(poly, coords)
