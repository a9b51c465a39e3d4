"""Covariance derivatives of Gaussian pairings and their numerical check.

For A in the positive definite region of upper-triangle coordinates and a
multiindex beta over the pairs (i, j), the derivative of
``A -> <g, phi_Omega(A)>`` equals ``(1/2)**|beta|_par`` times the pairing of
the ``flatten(beta)``-th distributional derivative of ``g``.  This module
evaluates that right-hand side and compares it to nested central
differences of the left-hand side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .covparam import (
    CovCoords,
    CovMultiindex,
    flatten,
    omega_pack,
    omega_unpack,
    parallel_weight,
    sigma_alpha,
    validate_pd,
)
from .errors import (
    DerivativeUnavailable,
    DimensionMismatch,
    InvalidParameter,
    NotPositiveDefinite,
    StencilLeavesPDCone,
)
from .expectation import Estimate, QuadratureSpec, pair
from .gaussian import GaussianModel
from .nonlinearity import GeneralizedFunction, weak_derivative

MATCH = "Match"
MISMATCH = "Mismatch"
UNVERIFIED = "Unverified"

SMOOTH_TOL = 1e-6
ROUGH_TOL = 1e-4
DEFAULT_FD_STEP = 1e-3
MAX_FD_ORDER = 3
MCMAHON_MARGIN = 1e-6


def _model(A: CovCoords) -> GaussianModel:
    return GaussianModel(validate_pd(omega_pack(A)))


def price_derivative(
    g: GeneralizedFunction, A: CovCoords, beta: CovMultiindex, q: QuadratureSpec | None = None
) -> Estimate:
    """``(1/2)**|beta|_par * <d^flat(beta) g, phi_Omega(A)>``.

    Never falls back to finite differences: a missing catalog derivative
    raises DerivativeUnavailable.
    """
    if not g.n == A.n == beta.n:
        raise DimensionMismatch(f"dimensions differ: g {g.n}, A {A.n}, beta {beta.n}")
    model = _model(A)
    dg = weak_derivative(g, flatten(beta))
    return pair(dg, model, q).scaled(0.5 ** parallel_weight(beta))


def mcmahon_derivative(
    f: GeneralizedFunction, alpha: float, order: int, q: QuadratureSpec | None = None
) -> Estimate:
    """k-th derivative in alpha of ``<f, phi_Sigma_alpha>`` for unit variances.

    Reduces to :func:`price_derivative` with ``beta = order * e_(1,2)``.
    """
    if f.n != 2:
        raise DimensionMismatch(f"expected a two-dimensional nonlinearity, got n={f.n}")
    if order < 0:
        raise InvalidParameter("order must be nonnegative")
    if not abs(alpha) < 1.0 - MCMAHON_MARGIN:
        raise NotPositiveDefinite(f"alpha={alpha} is not inside (-1, 1) with margin {MCMAHON_MARGIN}")
    A = omega_unpack(sigma_alpha(alpha))
    return price_derivative(f, A, CovMultiindex.unit(2, 0, 1, order), q)


def _stencil(A: CovCoords, directions, h: float) -> list[tuple[float, CovCoords]]:
    """Weights and points of nested central differences with halving steps."""
    if not directions:
        return [(1.0, A)]
    d, rest = directions[0], directions[1:]
    out = []
    for sgn in (1.0, -1.0):
        for w, pt in _stencil(A.shifted(d, sgn * h), rest, h / 2.0):
            out.append((sgn * w / (2.0 * h), pt))
    return out


def check_stencil(A: CovCoords, beta: CovMultiindex, step: float) -> list[tuple[float, CovCoords]]:
    points = _stencil(A, beta.directions(), step)
    for _, pt in points:
        try:
            validate_pd(omega_pack(pt))
        except NotPositiveDefinite as exc:
            raise StencilLeavesPDCone(
                f"stencil point {pt.values.tolist()} is not positive definite ({exc})"
            ) from None
    return points


def finite_difference(func, A: CovCoords, beta: CovMultiindex, step: float) -> float:
    """Nested central differences of ``func(A)`` along the directions of beta.

    Level k uses step ``step / 2**k``.  Raises StencilLeavesPDCone if any
    stencil point is not positive definite.
    """
    if not step > 0:
        raise InvalidParameter("finite-difference step must be positive")
    points = check_stencil(A, beta, step)
    cache = {}
    total = 0.0
    for w, pt in points:
        key = pt.values.tobytes()
        if key not in cache:
            cache[key] = func(pt)
        total = total + w * cache[key]
    return total


def fd_derivative(
    g: GeneralizedFunction, A: CovCoords, beta: CovMultiindex,
    step: float = DEFAULT_FD_STEP, q: QuadratureSpec | None = None,
) -> Estimate:
    """Finite-difference estimate of the covariance derivative (opt-in fallback).

    ``err`` compares steps ``step`` and ``step / 2``.
    """
    def func(pt):
        return pair(g, _model(pt), q).value

    coarse = finite_difference(func, A, beta, step)
    fine = finite_difference(func, A, beta, step / 2.0)
    return Estimate(fine, "FiniteDifference", float(abs(fine - coarse)))


@dataclass(frozen=True)
class PriceReport:
    beta: CovMultiindex
    price_value: Estimate | None
    fd_value: float | None
    fd_step: float | None
    abs_gap: float | None
    tol: float
    verdict: str
    note: str = ""

    def to_json(self) -> dict:
        return {
            "beta": self.beta.to_json(),
            "price_value": None if self.price_value is None else self.price_value.to_json(),
            "fd_value": None if self.fd_value is None else float(self.fd_value.real if isinstance(self.fd_value, complex) else self.fd_value),
            "fd_step": self.fd_step,
            "abs_gap": self.abs_gap,
            "tol": self.tol,
            "verdict": self.verdict,
            "note": self.note,
        }


def default_tol(g: GeneralizedFunction) -> float:
    return SMOOTH_TOL if g.is_smooth else ROUGH_TOL


def verify(
    g: GeneralizedFunction,
    A: CovCoords,
    beta: CovMultiindex,
    tol: float | None = None,
    fd_step: float = DEFAULT_FD_STEP,
    q: QuadratureSpec | None = None,
) -> PriceReport:
    """Compare :func:`price_derivative` against finite differences of the pairing."""
    if not g.n == A.n == beta.n:
        raise DimensionMismatch(f"dimensions differ: g {g.n}, A {A.n}, beta {beta.n}")
    tol = default_tol(g) if tol is None else float(tol)
    if beta.order > MAX_FD_ORDER:
        return PriceReport(beta, None, None, None, None, tol, UNVERIFIED,
                           f"|beta| = {beta.order} exceeds the finite-difference limit {MAX_FD_ORDER}")
    _model(A)
    check_stencil(A, beta, fd_step)
    try:
        price = price_derivative(g, A, beta, q)
    except DerivativeUnavailable as exc:
        return PriceReport(beta, None, None, None, None, tol, UNVERIFIED, str(exc))
    fd = finite_difference(lambda pt: pair(g, _model(pt), q).value, A, beta, fd_step)
    gap = float(abs(price.value - fd))
    verdict = MATCH if gap <= tol else MISMATCH
    if not math.isfinite(gap):
        verdict = MISMATCH
    return PriceReport(beta, price, fd, fd_step, gap, tol, verdict)
