import io
import itertools
import math

import mpmath
import numpy as np
import pytest

from gaussprice import clipstudy
from gaussprice.clipstudy import (
    E_ABS_STD_NORMAL,
    check_linear_bound,
    clip_correlation,
    clip_square_mean,
    continuity_modulus,
    f_tau_curve,
    f_tau_second_derivative,
    write_csv,
)
from gaussprice.errors import InvalidParameter, NotPositiveDefinite
from gaussprice.quadrature import gauss_hermite


def _f_one_mpmath(tau):
    # E[min(X^2, tau^2)] = (2 Phi(tau) - 1) - 2 tau phi(tau) + 2 tau^2 (1 - Phi(tau))
    t = mpmath.mpf(tau)
    return float((2 * mpmath.ncdf(t) - 1) - 2 * t * mpmath.npdf(t) + 2 * t**2 * (1 - mpmath.ncdf(t)))


@pytest.fixture(scope="module")
def curve():
    return f_tau_curve(1.0)


def test_half_normal_mean_constant():
    assert E_ABS_STD_NORMAL == pytest.approx(float(mpmath.sqrt(2 / mpmath.pi)), rel=1e-15)


@pytest.mark.parametrize("tau", [0.3, 1.0, 2.5])
def test_endpoint_value_against_closed_form(tau):
    assert clip_square_mean(tau) == pytest.approx(_f_one_mpmath(tau), abs=1e-14)


def test_endpoint_value_against_independent_quadratures():
    from scipy.integrate import quad
    from scipy.stats import norm

    split, _ = quad(lambda x: min(x * x, 1.0) * norm.pdf(x), -40, 40, points=[-1, 1], epsabs=1e-14)
    assert clip_square_mean(1.0) == pytest.approx(split, abs=1e-12)
    assert clip_square_mean(1.0) == pytest.approx(0.516058550961713, abs=1e-10)
    # plain Gauss-Hermite ignores the kinks at +-tau and only gets ~2-3 digits at order 200
    x, w = gauss_hermite(200)
    assert clip_square_mean(1.0) == pytest.approx(float(np.sum(w * np.minimum(x * x, 1.0))), abs=5e-3)


def test_curve_shape(curve):
    assert curve.alphas.size == 201
    assert curve.alphas[0] == -1.0 and curve.alphas[-1] == 1.0
    assert curve.values[-1] == curve.f_one
    assert curve.values[0] == -curve.f_one
    assert math.isnan(curve.second_derivs[0]) and math.isnan(curve.second_derivs[-1])
    assert abs(curve.values[100]) <= 1e-8


def test_curve_is_odd(curve):
    np.testing.assert_allclose(curve.values, -curve.values[::-1], atol=1e-8, rtol=0)


def test_convex_on_nonnegative_grid(curve):
    mask = (curve.alphas >= 0) & (curve.alphas < 1)
    assert np.all(curve.second_derivs[mask] >= -1e-12)


def test_continuity_at_the_endpoint():
    for tau in (0.5, 1.0, 2.0):
        near = clip_correlation(tau, 1 - 1e-6)
        assert abs(near - clip_square_mean(tau)) <= continuity_modulus(tau, 1 - 1e-6, 1.0) + 1e-8


def test_second_derivative_examples():
    assert f_tau_second_derivative(1.0, 0.0) == pytest.approx(0.0, abs=1e-17)
    v = f_tau_second_derivative(1.0, 0.5)
    assert v > 0
    from gaussprice.covparam import sigma_alpha, validate_pd
    from gaussprice.gaussian import GaussianModel

    m = GaussianModel(validate_pd(sigma_alpha(0.5)))
    assert v == pytest.approx(2 * (m.density([1.0, 1.0]) - m.density([-1.0, 1.0])), rel=1e-14)
    with pytest.raises(NotPositiveDefinite):
        f_tau_second_derivative(1.0, 1.0)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_second_derivative_matches_second_difference(alpha):
    h = 1e-3
    F = [clip_correlation(1.0, alpha + s * h) for s in (-1, 0, 1)]
    assert (F[0] - 2 * F[1] + F[2]) / h**2 == pytest.approx(f_tau_second_derivative(1.0, alpha), abs=1e-5)


def test_linear_bound_examples():
    rep = check_linear_bound(1.0)
    assert rep.holds
    assert rep.slack[0] == pytest.approx(0.0, abs=1e-8)
    assert rep.slack[-1] == pytest.approx(0.0, abs=1e-8)
    half = int(np.argmin(np.abs(rep.alphas - 0.5)))
    assert rep.slack[half] > 1e-3
    assert rep.max_slack == pytest.approx(float(np.max(rep.slack)))
    with pytest.raises(InvalidParameter):
        check_linear_bound(1.0, [-0.5, 0.5])


def test_continuity_modulus_examples():
    assert continuity_modulus(1.0, 0.3, 0.3) == 0.0
    assert continuity_modulus(1.0, 0.0, 0.6) == pytest.approx(0.8 * math.sqrt(2 / math.pi), rel=1e-15)
    with pytest.raises(InvalidParameter):
        continuity_modulus(1.0, 0.0, 1.5)


def test_continuity_modulus_dominates_differences():
    tau = 1.0
    grid = np.linspace(-1, 1, 21)
    values = {a: clip_correlation(tau, a) for a in grid}
    rng = np.random.default_rng(5)
    pairs = list(itertools.combinations(grid, 2))
    for k in rng.choice(len(pairs), size=60, replace=False):
        a, b = pairs[k]
        assert abs(values[a] - values[b]) <= continuity_modulus(tau, a, b) + 1e-8


def test_invalid_inputs():
    with pytest.raises(InvalidParameter):
        clip_correlation(0.0, 0.2)
    with pytest.raises(InvalidParameter):
        clip_correlation(1.0, 1.0 - 1e-8)
    with pytest.raises(InvalidParameter):
        f_tau_curve(1.0, [0.0, 1.5])
    with pytest.raises(InvalidParameter):
        f_tau_curve(1.0, [])


def test_csv_output():
    c = f_tau_curve(1.0, [-1.0, 0.0, 0.5, 1.0])
    buf = io.StringIO()
    write_csv(c, buf, comment="config: {}")
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# config: {}"
    assert lines[1] == "alpha,F_tau,F_second,linear_bound,slack"
    assert lines[3].startswith("0,0,0,0,0")
    row = lines[4].split(",")
    assert float(row[1]) == c.values[2]
    assert len(row[1].replace("0.", "").lstrip("0")) >= 15
    assert lines[2].split(",")[2] == "nan"


def test_parallel_evaluation_is_deterministic(monkeypatch):
    grid = np.linspace(-1, 1, 9)
    serial = f_tau_curve(0.7, grid).values
    monkeypatch.setenv("GAUSSPRICE_WORKERS", "4")
    np.testing.assert_array_equal(f_tau_curve(0.7, grid).values, serial)
