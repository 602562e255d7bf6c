import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from bhlab.errors import ConfigurationError
from bhlab.kernels import (
    I_kernel,
    J_functional,
    KernelTable,
    WeightParams,
    fit_exponent,
    gregory_weights,
    integrability_report,
    kernel_table,
    w2_over_W_exact,
    weight_W,
    weight_w,
    weighted_square_integral,
)
from bhlab.quadrature import k_alpha_H
from bhlab.spectral import GridSpec

from conftest import bandlimited

# I(x) = int_0^inf (w(x+t) - w(x-t)) t^{-1-alpha} dt by mpmath.quad at 30 digits,
# split at 0, |x|, ||x| - 1|, |x| + 1
I_ORACLE = [
    ((0.5, 2.5, 0.5), 0.05, -1.3345850940604556),
    ((0.5, 2.5, 0.5), 0.7, -1.6804020998152781),
    ((0.5, 2.5, 0.5), 1.6, -2.2353702012586092),
    ((0.5, 2.5, 0.5), 20.0, -0.0044698047495632328),
    ((0.3, 3.0, 0.25), 0.05, 12.038584359311282),
    ((0.3, 3.0, 0.25), 0.7, 0.13689134853617107),
    ((0.3, 3.0, 0.25), 1.6, -1.4391648794185972),
    ((0.3, 3.0, 0.25), 20.0, -0.0047955286639152584),
    ((0.7, 2.8, 0.6), 0.05, -104.48023861449257),
    ((0.7, 2.8, 0.6), 0.7, -4.6556903088729108),
    ((0.7, 2.8, 0.6), 1.6, -2.8831329484841227),
    ((0.7, 2.8, 0.6), 20.0, -0.0029222457581577842),
]

# six triples on both sides of the window 2 < p < 2 + 2 alpha (and q < 2(1 - alpha))
TRIPLES = [(0.5, 2.5, 0.5), (0.5, 3.0, 0.1), (0.3, 3.0, 0.75), (0.8, 3.0, 0.75),
           (0.3, 2.2, 0.25), (0.3, 2.8, 0.25)]


@pytest.mark.parametrize("q, p, a", [(0.0, 2.5, 0.5), (1.0, 2.5, 0.5), (1.5, 2.5, 0.5), (0.5, 2.0, 0.5),
                                     (0.5, 1.0, 0.5), (0.5, 2.5, -0.1), (0.5, 2.5, 1.0)])
def test_weight_params_validation(q, p, a):
    with pytest.raises(ConfigurationError):
        WeightParams(q, p, a)


def test_strict_window():
    assert WeightParams(0.5, 2.5, 0.5).strict_window
    assert not WeightParams(0.5, 3.0, 0.1).strict_window
    assert not WeightParams(0.8, 3.0, 0.75).strict_window


def test_weights_values_and_derivative():
    wp = WeightParams(0.5, 2.5, 0.5)
    assert weight_w(0.25, wp) == pytest.approx(2.0)
    assert weight_w(-4.0, wp) == pytest.approx(-(4.0 ** -2.5))
    for x in (0.3, 0.9, 1.5, 7.0, -0.4, -3.0):
        h = 1e-6
        fd = -(weight_w(x + h, wp) - weight_w(x - h, wp)) / (2 * h)
        assert weight_W(x, wp) == pytest.approx(fd, rel=1e-6)
        assert weight_W(x, wp) > 0
    with pytest.raises(ConfigurationError):
        weight_w(0.0, wp)
    with pytest.raises(ConfigurationError):
        weight_W(np.array([1.0, 0.0]), wp)


@pytest.mark.parametrize("triple, x, ref", I_ORACLE)
def test_I_kernel_against_oracle(triple, x, ref):
    assert I_kernel(x, WeightParams(*triple)) == pytest.approx(ref, rel=1e-9)


@given(st.floats(1e-3, 1e3), st.sampled_from(TRIPLES))
def test_I_kernel_even(x, triple):
    wp = WeightParams(*triple)
    assert I_kernel(-x, wp) == pytest.approx(I_kernel(x, wp), rel=1e-10)


def test_I_kernel_domain():
    wp = WeightParams(0.5, 2.5, 0.5)
    with pytest.raises(ConfigurationError):
        I_kernel(0.0, wp)
    with pytest.raises(ConfigurationError):
        I_kernel(1.0, wp, alpha=0.0)
    v, err, tail = I_kernel(3.0, wp, full=True)
    assert err <= 1e-8 * max(1.0, abs(v)) and 0 < tail < 1e-20


def test_fit_exponent_recovers_power_law():
    xs = np.geomspace(1, 100, 9)
    fit = fit_exponent(xs, 3 * xs ** -1.7)
    assert fit.exponent == pytest.approx(-1.7, abs=1e-12)
    lo, hi = fit.ci95()
    assert lo <= fit.exponent <= hi
    with pytest.raises(ConfigurationError):
        fit_exponent([1, 2], [1, 2])


def test_kernel_table_generic_triple():
    # q + alpha = 1.3: both regimes fitted within 0.05
    tab = kernel_table(WeightParams(0.7, 2.8, 0.6), per_decade=5)
    assert abs(tab.small_fit.exponent + 1.3) <= 0.05
    assert abs(tab.large_fit.exponent + 2.6) <= 0.05
    assert set(tab.constants) == {"K1", "K2", "K3"}


def test_kernel_table_middle_range_only(tmp_path):
    tab = kernel_table(WeightParams(0.5, 2.5, 0.5), 0.5, 2.0, per_decade=10)
    assert tab.small_fit is None and tab.large_fit is None
    assert tab.constants["K3"] == pytest.approx(np.max(np.abs(tab.values)))
    tab.to_csv(tmp_path / "k.csv")
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert lines[0] == "x,I_value,tail_bound"
    assert len(lines) == tab.abscissae.size + 1
    assert float(lines[1].split(",")[1]) == tab.values[0]  # 17 digits round-trip


def test_kernel_table_validation():
    wp = WeightParams(0.5, 2.5, 0.5)
    with pytest.raises(ConfigurationError):
        KernelTable(wp, np.array([1.0, 0.5]), np.zeros(2), np.zeros(2), np.zeros(2))


@pytest.mark.parametrize("triple", TRIPLES)
def test_integrability_verdicts_match_exponents(triple):
    rep = integrability_report(WeightParams(*triple))
    for v in (rep.I2_over_W, rep.w2_over_W):
        assert v.finite_at_zero == (v.predicted_exponent_zero > -1)
        assert v.finite_at_inf == (v.predicted_exponent_inf < -1)
    assert rep.I2_over_W.finite == rep.in_window


@pytest.mark.parametrize("triple", TRIPLES)
def test_c_constant_closed_form(triple):
    wp = WeightParams(*triple)
    rep = integrability_report(wp)
    assert rep.c_lower == pytest.approx(1 / (4 * w2_over_W_exact(wp)), rel=1e-6)
    if rep.C_upper is not None:
        assert rep.C_upper > 0
        assert rep.C_upper == pytest.approx(k_alpha_H(wp.alpha) ** 2 * rep.I2_over_W.integral)


@pytest.mark.parametrize("order", [2, 4, 8])
def test_gregory_weights_exact_for_polynomials(order):
    c = gregory_weights(order)
    m = 40
    j = np.arange(m + 1, dtype=float)
    for d in range(order):
        f = j ** d
        approx = f.sum() - 0.5 * (f[0] + f[-1]) + f[:order] @ c + f[::-1][:order] @ c
        assert approx == pytest.approx(m ** (d + 1) / (d + 1), rel=1e-11)


def _quad_J(f, x, wp, R):
    # int_0^R w(z) (f(x - z) - f(x + z)) dz with the z^{-q} singularity as a weight
    g = lambda z: f(x - z) - f(x + z)
    near = integrate.quad(g, 0, 1, weight="alg", wvar=(-wp.q, 0), epsabs=1e-14, epsrel=1e-13)[0]
    far = integrate.quad(lambda z: z ** -wp.p * g(z), 1, R, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return near + far


def _quad_sq(f, fx, x, wp, R):
    g = lambda z: (f(x) - f(x - z)) ** 2 + (f(x) - f(x + z)) ** 2
    ratio = lambda z: g(z) / z ** 2 if z > 0 else 2 * fx(x) ** 2
    near = integrate.quad(ratio, 0, 1, weight="alg", wvar=(1 - wp.q, 0), epsabs=1e-14, epsrel=1e-13)[0]
    far = integrate.quad(lambda z: wp.p * z ** (-wp.p - 1) * g(z), 1, R, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return wp.q * near + far


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("x", [-1.3, 0.2, 2.71])
def test_field_functionals_against_scipy(seed, x):
    # far part is a Gregory-corrected trapezoid; its error scales like (h kappa_max)^8
    wp = WeightParams(0.5, 2.5, 0.5)
    g = GridSpec(512, 12.0)
    u, f, fx = bandlimited(seed, g, kmax=10)
    fs = lambda z: float(f(z))
    ref = _quad_J(fs, x, wp, 6.0)
    assert J_functional(u, x, wp) == pytest.approx(ref, rel=1e-9, abs=1e-10)
    ref2 = _quad_sq(fs, lambda z: float(fx(z)), x, wp, 6.0)
    assert weighted_square_integral(u, x, wp) == pytest.approx(ref2, rel=1e-9)


def test_J_functional_tail_bound():
    wp = WeightParams(0.5, 2.5, 0.5)
    g = GridSpec(128, 20.0)
    u, _, _ = bandlimited(4, g)
    val, bound = J_functional(u, 0.0, wp, full=True)
    assert bound == pytest.approx(2 * np.max(np.abs(u.values)) * 10.0 ** -1.5 / 1.5)
    assert math.isfinite(val)
