import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bhlab.errors import ConfigurationError
from bhlab.inequalities import (
    CertReport,
    FieldSample1D,
    FieldSample2D,
    GaussianSum1D,
    RadialBump2D,
    appendix_certify,
    appendix_constant,
    gns_certify,
    k_alpha_n,
    lemma22_certify,
    pwi_certify,
    quadratic_form,
    random_bandlimited_field,
    random_gaussian_sum,
    threshold_check,
    unit_ball_volume,
)
from bhlab.quadrature import k_alpha, lambda_alpha
from bhlab.solver import RationalFamily
from bhlab.spectral import GridSpec, RealField

THRESHOLD = 128 * math.pi ** 2


# ---------------------------------------------------------------------------
# constants


def test_constants():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert k_alpha_n(1.0, 1) == pytest.approx(1 / math.pi)
    assert appendix_constant(1.0, 2.0, 1) == pytest.approx(16 * math.pi)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 1.5])
def test_k_alpha_n_matches_line_constant(alpha):
    assert k_alpha_n(alpha, 1) == pytest.approx(k_alpha(alpha), rel=1e-13)


@pytest.mark.parametrize("alpha, p, n", [(0.0, 2.0, 1), (2.0, 2.0, 1), (0.5, 0.0, 1), (0.5, 2.0, 3)])
def test_constant_domain(alpha, p, n):
    with pytest.raises(ConfigurationError):
        appendix_constant(alpha, p, n)


def test_cert_report_rejects_nonfinite_margin():
    with pytest.raises(ConfigurationError):
        CertReport("x", 1, math.nan, True, (0.0,), 1e-6)


# ---------------------------------------------------------------------------
# Dini lower bound


def test_lemma22_zero_field():
    r = lemma22_certify(RealField.zeros(GridSpec(64, 10.0)))
    assert r.passed and r.worst_margin == 0.0


def test_lemma22_rational_family_positive_margin():
    g = GridSpec(1024, 40.0)
    v = RationalFamily(1.0, 1.0)(g.nodes, g.domain_length)
    r = lemma22_certify(RealField(g, v - v.mean()))
    assert r.passed and r.worst_margin > 0


@given(st.integers(0, 10_000))
def test_lemma22_random_bandlimited(seed):
    g = GridSpec(256, 20.0)
    u = random_bandlimited_field(np.random.default_rng(seed), g)
    assert lemma22_certify(u).passed



def test_lemma22_scaling_covariance():
    g = GridSpec(256, 20.0)
    u = random_bandlimited_field(np.random.default_rng(7), g) * 300.0
    base = lemma22_certify(u)
    assert base.details["scale"] > 1
    # amplitude: both sides scale by lambda^2
    amp = lemma22_certify(u * 2.0)
    assert amp.worst_margin == pytest.approx(base.worst_margin, abs=1e-6)
    # dilation x -> 2x: both sides scale by 2
    dil = lemma22_certify(RealField(GridSpec(256, 10.0), u.values))
    assert dil.worst_margin == pytest.approx(base.worst_margin, abs=1e-6)


# ---------------------------------------------------------------------------
# threshold


def test_threshold_subcritical():
    r = threshold_check(1.0, 1.0)
    assert not r.satisfied and r.margin < 0
    assert r.E == pytest.approx(math.pi / 2, rel=1e-12)
    assert r.u0_beta0 == pytest.approx(0.5)
    assert r.threshold == pytest.approx((16 * math.pi ** 2) ** (1 / 3), rel=1e-12)


def test_threshold_supercritical():
    r = threshold_check(1300.0, 1.0)
    assert r.satisfied and r.beta0 == -1.0
    assert r.Hu0_beta0 == pytest.approx(650.0, rel=1e-9)


@pytest.mark.parametrize("b", [0.5, 1.0, 2.0])
def test_threshold_marginal_and_b_independent(b):
    r = threshold_check(THRESHOLD, b)
    assert abs(r.margin) <= 1e-9 * THRESHOLD
    assert r.satisfied
    assert r.Hu0_beta0 == pytest.approx(THRESHOLD / (2 * b), rel=1e-8)
    assert not threshold_check(THRESHOLD * (1 - 1e-6), b).satisfied
    assert threshold_check(THRESHOLD * (1 + 1e-6), b).satisfied


def test_threshold_strict_amplitude_variant():
    assert threshold_check(1300.0, 1.0, "strict_amplitude").satisfied
    assert not threshold_check(THRESHOLD, 1.0, "strict_amplitude").satisfied  # strict inequality fails at the margin
    with pytest.raises(ConfigurationError):
        threshold_check(1.0, 1.0, "other")
    with pytest.raises(ConfigurationError):
        threshold_check(-1.0, 1.0)


# ---------------------------------------------------------------------------
# quadratic form and the pointwise inequality


def gauss(x):
    return np.exp(-np.asarray(x, dtype=float) ** 2)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_quadratic_form_equals_commutator(alpha):
    # k int (f(y) - f(x))^2 / |x - y|^{1+alpha} = 2 f Lambda^alpha f - Lambda^alpha (f^2)
    sample = FieldSample1D(GridSpec(16, 8.0), GaussianSum1D((1.0,), (0.0,), (1.0,)))
    x = np.array([-1.5, -0.2, 0.0, 0.9, 2.2])
    ref = 2 * gauss(x) * lambda_alpha(gauss, x, alpha) - lambda_alpha(lambda y: gauss(y) ** 2, x, alpha)
    np.testing.assert_allclose(quadratic_form(sample, x, alpha), ref, rtol=1e-6, atol=1e-9)


def test_quadratic_form_2d_matches_spectral_reference():
    b = RadialBump2D((1.0,), ((0.0, 0.0),), (0.8,))
    s = FieldSample2D(256, 16.0, b)
    pts = (np.array([0.0, 0.5, 1.3, 3.0]), np.array([0.0, 0.2, -0.4, 1.0]))
    # values of 2 f Lambda^{1/2} f - Lambda^{1/2} f^2 from a 1024^2 FFT on a box of side 80
    ref = np.array([1.16191764, 0.51408775, 0.04784284, 0.00498508])
    np.testing.assert_allclose(quadratic_form(s, pts, 0.5), ref, rtol=1e-4, atol=3e-5)


@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 1.5]))
@settings(max_examples=10)
def test_quadratic_form_nonnegative(seed, alpha):
    f = random_gaussian_sum(np.random.default_rng(seed))
    s = FieldSample1D(GridSpec(64, 16.0), f)
    assert np.all(quadratic_form(s, s.grid.nodes, alpha) >= 0)


def test_appendix_zero_field():
    s = FieldSample1D(GridSpec(32, 8.0), GaussianSum1D((0.0,), (0.0,), (1.0,)))
    r = appendix_certify(s, 0.5, 2.0)
    assert r.passed and r.worst_margin == 0.0


@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 1.5]), st.sampled_from([1.0, 2.0, 4.0]))
@settings(max_examples=12)
def test_appendix_and_gns_random_1d(seed, alpha, p):
    f = random_gaussian_sum(np.random.default_rng(seed))
    s = FieldSample1D(GridSpec(128, 16.0), f)
    assert appendix_certify(s, alpha, p).passed
    assert gns_certify(s, alpha, p).passed


@given(st.integers(0, 10_000))
@settings(max_examples=8)
def test_forced_constant_reproduces_pointwise_form(seed):
    # D carries k_{1,1} = 1/pi, so the factor 16 form corresponds to C = 16 pi
    f = random_gaussian_sum(np.random.default_rng(seed))
    s = FieldSample1D(GridSpec(64, 16.0), f)
    a = appendix_certify(s, 1.0, 2.0, constant=16 * math.pi)
    b = pwi_certify(s)
    assert a.passed == b.passed
    assert a.worst_margin == pytest.approx(b.worst_margin, rel=1e-9, abs=1e-12)


def test_gns_single_mode_closed_form():
    # n = 1, alpha = 1, p = 2 on the torus: LHS = 3 L A^4 / 8, RHS = 2 (16 pi) (A^2 L/2) (kappa A^2 L/2)
    L, A = 10.0, 1.3
    g = GridSpec(64, L)
    kap = 2 * np.pi / L
    r = gns_certify(RealField(g, A * np.sin(kap * g.nodes)), 1.0, 2.0)
    assert r.details["lhs"] == pytest.approx(3 * L * A ** 4 / 8, rel=1e-13)
    assert r.details["rhs"] == pytest.approx(32 * math.pi * (A * A * L / 2) * (kap * A * A * L / 2), rel=1e-12)
    assert r.passed


def test_gns_2d_bump():
    s = FieldSample2D(128, 12.0, RadialBump2D((1.5,), ((0.0, 0.0),), (0.7,)))
    assert gns_certify(s, 0.5, 2.0).passed


def test_sample_validation():
    with pytest.raises(ConfigurationError):
        FieldSample2D(1024, 10.0, RadialBump2D((1.0,), ((0, 0),), (1.0,)))
    with pytest.raises(ConfigurationError):
        FieldSample1D(GridSpec(16, 1.0), gauss, decay_class="fractal")
    pts = FieldSample2D(64, 10.0, RadialBump2D((1.0,), ((0, 0),), (1.0,))).sample_points()
    assert pts[0].size == 32 * 32
