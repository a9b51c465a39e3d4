"""The clipping correlator of a hard limiter.

With ``f_tau(x) = clip(x, -tau, tau)`` and unit-variance Gaussians ``X, Y``
of correlation ``alpha``, ``F_tau(alpha) = E[f_tau(X) f_tau(Y)]``.  Its
second derivative is the pairing of ``d^4 (f_tau x f_tau) / dx1^2 dx2^2``,
four signed point masses at the corners ``(+-tau, +-tau)``, so it is a signed
sum of density values.  F_tau is odd, convex on [0, 1], vanishes at 0 and
lies below the chord ``alpha * F_tau(1)``.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .covparam import sigma_alpha, validate_pd
from .errors import InvalidParameter
from .expectation import QuadratureSpec, interval_expectation, pair
from .gaussian import GaussianModel, worker_count
from .nonlinearity import GeneralizedFunction, clip_1d, piecewise_polynomial, tensor

# X ~ N(0, 1): E|X| = 2 * int_0^inf x phi(x) dx = 2 * phi(0) = sqrt(2 / pi),
# the mean of the half-normal distribution.
E_ABS_STD_NORMAL = math.sqrt(2.0 / math.pi)

INTERIOR_LIMIT = 1.0 - 1e-6
DEFAULT_GRID_POINTS = 201
BOUND_SLACK = 1e-8
CSV_COLUMNS = ("alpha", "F_tau", "F_second", "linear_bound", "slack")


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not (tau > 0 and math.isfinite(tau)):
        raise InvalidParameter(f"tau must be positive and finite, got {tau}")
    return tau


def clip_pair(tau: float) -> GeneralizedFunction:
    """g_tau = f_tau (x) f_tau."""
    f = clip_1d(_check_tau(tau))
    return tensor([f, f])


def clip_square_mean(tau: float) -> float:
    """E[f_tau(X)^2] = E[min(X^2, tau^2)], integrated exactly piece by piece."""
    tau = _check_tau(tau)
    sq = piecewise_polynomial((-tau, tau), ((tau * tau,), (0.0, 0.0, 1.0), (tau * tau,)), label="clip^2")
    return float(interval_expectation(sq, np.zeros(1), 1.0)[0])


def clip_correlation(tau: float, alpha: float, q: QuadratureSpec | None = None) -> float:
    """F_tau(alpha) on the closed interval [-1, 1].

    ``alpha = +-1`` use the one-dimensional reduction (``Y = +-X``); the open
    band ``INTERIOR_LIMIT < |alpha| < 1`` is rejected because the 2-d pairing
    is ill-conditioned there.
    """
    tau = _check_tau(tau)
    alpha = float(alpha)
    if not -1.0 <= alpha <= 1.0:
        raise InvalidParameter(f"alpha must lie in [-1, 1], got {alpha}")
    if abs(alpha) == 1.0:
        return math.copysign(clip_square_mean(tau), alpha)
    if abs(alpha) > INTERIOR_LIMIT:
        raise InvalidParameter(f"|alpha| = {abs(alpha)} is within 1e-6 of 1 but not an endpoint")
    m = GaussianModel(validate_pd(sigma_alpha(alpha)))
    return float(pair(clip_pair(tau), m, q).value)


def f_tau_second_derivative(tau: float, alpha: float) -> float:
    """phi(t,t) - phi(-t,t) - phi(t,-t) + phi(-t,-t) for the correlation-alpha density."""
    tau = _check_tau(tau)
    m = GaussianModel(validate_pd(sigma_alpha(alpha)))
    corners = np.array([[tau, tau], [-tau, tau], [tau, -tau], [-tau, -tau]])
    d = m.density(corners)
    return float(d[0] - d[1] - d[2] + d[3])


def continuity_modulus(tau: float, alpha: float, beta: float) -> float:
    """A-priori bound on |F_tau(alpha) - F_tau(beta)|.

    Write Y_a = a X + sqrt(1 - a^2) Z; f_tau is tau-Lipschitz and bounded by
    tau, so the difference is at most
    ``tau * (|a - b| + |sqrt(1-a^2) - sqrt(1-b^2)|) * E|X|``.
    """
    tau = _check_tau(tau)
    for v in (alpha, beta):
        if not -1.0 <= v <= 1.0:
            raise InvalidParameter(f"correlation must lie in [-1, 1], got {v}")
    root = abs(math.sqrt(1.0 - alpha * alpha) - math.sqrt(1.0 - beta * beta))
    return tau * (abs(alpha - beta) + root) * E_ABS_STD_NORMAL


def default_grid(points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    if points < 2:
        raise InvalidParameter(f"grid needs at least 2 points, got {points}")
    return np.linspace(-1.0, 1.0, points)


def _evaluate(fn, args: list) -> list:
    workers = worker_count()
    if workers > 1 and len(args) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, args))
    return [fn(a) for a in args]


@dataclass(frozen=True)
class ClipCurve:
    """F_tau on a grid; ``second_derivs`` is NaN at alpha = +-1."""

    tau: float
    alphas: np.ndarray
    values: np.ndarray
    second_derivs: np.ndarray
    f_one: float

    @property
    def linear_bound(self) -> np.ndarray:
        return self.alphas * self.f_one

    @property
    def slack(self) -> np.ndarray:
        return self.linear_bound - self.values

    def rows(self):
        for row in zip(self.alphas, self.values, self.second_derivs, self.linear_bound, self.slack):
            yield tuple(float(v) for v in row)

    def to_json(self) -> dict:
        return {
            "tau": self.tau,
            "f_one": self.f_one,
            "rows": [dict(zip(CSV_COLUMNS, (_json_float(v) for v in r))) for r in self.rows()],
        }


def _json_float(v: float):
    return None if math.isnan(v) else v


def f_tau_curve(tau: float, grid=None, q: QuadratureSpec | None = None) -> ClipCurve:
    tau = _check_tau(tau)
    alphas = default_grid() if grid is None else np.asarray(grid, dtype=float).ravel()
    if alphas.size == 0:
        raise InvalidParameter("grid is empty")
    bad = alphas[(alphas < -1.0) | (alphas > 1.0) | ~np.isfinite(alphas)]
    if bad.size:
        raise InvalidParameter(f"grid points outside [-1, 1]: {bad.tolist()}")
    f_one = clip_square_mean(tau)
    values = np.array(_evaluate(lambda a: clip_correlation(tau, a, q), alphas.tolist()))
    second = np.array([
        math.nan if abs(a) == 1.0 else f_tau_second_derivative(tau, a) for a in alphas.tolist()
    ])
    return ClipCurve(tau, alphas, values, second, f_one)


@dataclass(frozen=True)
class LinearBoundReport:
    """``slack = alpha * F_tau(1) - F_tau(alpha)``; ``holds`` iff slack >= -1e-8 everywhere."""

    tau: float
    alphas: np.ndarray
    values: np.ndarray
    slack: np.ndarray
    holds: bool
    max_slack: float
    min_slack: float


def check_linear_bound(tau: float, grid=None, q: QuadratureSpec | None = None) -> LinearBoundReport:
    alphas = np.linspace(0.0, 1.0, 101) if grid is None else np.asarray(grid, dtype=float).ravel()
    if alphas.size and (alphas.min() < 0.0 or alphas.max() > 1.0):
        raise InvalidParameter("linear-bound grid must lie in [0, 1]")
    curve = f_tau_curve(tau, alphas, q)
    slack = curve.slack
    return LinearBoundReport(
        curve.tau, curve.alphas, curve.values, slack,
        bool(np.all(slack >= -BOUND_SLACK)), float(np.max(slack)), float(np.min(slack)),
    )


def write_csv(curve: ClipCurve, stream, comment: str | None = None) -> None:
    """CSV with a header row and every float at 17 significant digits."""
    if comment is not None:
        stream.write(f"# {comment}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in curve.rows():
        w.writerow(["%.17g" % v for v in row])
