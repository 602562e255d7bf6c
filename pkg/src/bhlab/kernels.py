r"""Power-law weight kernels and the kernel integral ``I``.

The odd kernel

.. math::

    w(x) = \operatorname{sign}(x)\,|x|^{-q}\ (|x|<1), \qquad
    w(x) = \operatorname{sign}(x)\,|x|^{-p}\ (|x|>1)

and its negative derivative ``W = -w'`` drive the weighted functional
``J u = w * u``.  ``I(x)`` is the signed-kernel fractional operator applied
to ``w``; its decay at 0 and infinity decides whether ``I^2/W`` is
integrable, which is where the window on ``(p, q, alpha)`` comes from.

Field integrals (:func:`J_functional`, :func:`weighted_square_integral`)
truncate the kernel at half the domain length.  Near the evaluation point
they use graded Gauss-Legendre panels on the trigonometric interpolant;
beyond that they use the grid samples of the field translated to the
evaluation point, summed by a Gregory-corrected trapezoidal rule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import linregress

from .errors import ConfigurationError, QuadratureError
from .quadrature import QuadratureSpec, geometric_edges, graded_edges, k_alpha_H, panel_rule
from .spectral import RealField, interpolate

__all__ = [
    "WeightParams",
    "weight_w",
    "weight_W",
    "I_kernel",
    "KernelTable",
    "ExponentFit",
    "kernel_table",
    "fit_exponent",
    "IntegrabilityReport",
    "RatioVerdict",
    "integrability_report",
    "J_functional",
    "weighted_square_integral",
    "gregory_weights",
]


@dataclass(frozen=True)
class WeightParams:
    q: float
    p: float
    alpha: float

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ConfigurationError(f"weight exponent q must lie in (0, 1), got {self.q}")
        if not self.p > 2:
            raise ConfigurationError(f"weight exponent p must exceed 2, got {self.p}")
        if not 0 <= self.alpha < 1:
            raise ConfigurationError(f"alpha must lie in [0, 1), got {self.alpha}")

    @property
    def strict_window(self) -> bool:
        """``2 < p < 2 + 2 alpha`` and ``q < 2 (1 - alpha)``."""
        return 2 < self.p < 2 + 2 * self.alpha and self.q < 2 * (1 - self.alpha)


def _w(x, q, p):
    a = np.abs(x)
    with np.errstate(divide="ignore"):
        mag = np.where(a < 1, a ** (-q), a ** (-p))
    return np.sign(x) * mag


def _W(x, q, p):
    a = np.abs(x)
    with np.errstate(divide="ignore"):
        return np.where(a < 1, q * a ** (-q - 1), p * a ** (-p - 1))


def _nonzero(x):
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise ConfigurationError("weight kernels are singular at x = 0")
    return x


def weight_w(x, wp: WeightParams):
    """Odd kernel ``w``; raises at ``x = 0``."""
    out = _w(_nonzero(x), wp.q, wp.p)
    return float(out) if np.ndim(out) == 0 else out


def weight_W(x, wp: WeightParams):
    """Even positive kernel ``W = -w'`` (two-sided values at ``|x| = 1`` differ)."""
    out = _W(_nonzero(x), wp.q, wp.p)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# I(x) = int (w(x) - w(y)) sign(x - y) |x - y|^{-1-alpha} dy
#      = int_0^inf (w(x + t) - w(x - t)) t^{-1-alpha} dt


@lru_cache(maxsize=None)
def _jacobi_rule(alpha, order=24):
    from scipy.special import roots_jacobi

    return roots_jacobi(order, 0.0, -alpha)


def _I_once(x, q, p, alpha, per_decade, far_decades=8):
    ax = abs(x)
    t_far = 2.0 * (ax + 1.0)
    kinks = {abs(ax - 1.0), ax + 1.0} - {0.0, ax}
    # t = |x| puts one of x -+ t at the origin, where w ~ |.|^{-q}; the
    # singular part is odd about t = |x|, so points |x| -+ s are paired
    delta = 0.5 * min([ax] + [abs(k - ax) for k in kinks])
    first = min([ax - delta] + [k for k in kinks if k > 0])
    t0 = 0.25 * first
    sj, wj = _jacobi_rule(alpha)
    nodes = [0.5 * t0 * (1 + sj)]
    weights = [wj * (0.5 * t0) ** (1 - alpha) * nodes[0] ** alpha]
    cuts = sorted({t0, ax - delta, ax + delta, t_far} | kinks)
    excluded = (ax - delta, ax + delta)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo or (lo, hi) == excluded:
            continue
        t, wt = panel_rule(graded_edges(lo, hi, lo in kinks or lo == ax + delta,
                                        hi in kinks or hi == ax - delta, per_decade))
        nodes.append(t)
        weights.append(wt)
    R = t_far * 10.0 ** far_decades
    t, wt = panel_rule(geometric_edges(t_far, R, per_decade))
    nodes.append(t)
    weights.append(wt)
    t = np.concatenate(nodes)
    wt = np.concatenate(weights)

    def f(t):
        return (_w(x + t, q, p) - _w(x - t, q, p)) * t ** (-1.0 - alpha)

    vals = f(t)
    s, ws = panel_rule(graded_edges(0.0, delta, True, False, per_decade,
                                    min_rel=1e-13 * max(ax, delta) / delta))
    paired = f(ax + s) + f(ax - s)
    value = float(vals @ wt + paired @ ws)
    mass = float(np.abs(vals) @ wt + np.abs(paired) @ ws)
    tail_bound = 2.0 * (R - ax) ** (-p) * R ** (-alpha) / alpha
    return value, tail_bound, mass


def I_kernel(x, wp: WeightParams, alpha=None, spec: QuadratureSpec = QuadratureSpec(panels_per_decade=8),
             full=False):
    """Evaluate ``I(x)`` for ``x != 0`` by panel splitting at ``0, |x|, |1 -+ |x||``.

    No symmetry is assumed, so ``I(-x) = I(x)`` is a genuine check.  With
    ``full=True`` returns ``(value, error_estimate, tail_bound)``.
    """
    alpha = wp.alpha if alpha is None else alpha
    if not 0 < alpha < 1:
        raise ConfigurationError(f"alpha must lie in (0, 1) for I, got {alpha}")
    x = float(x)
    if x == 0:
        raise ConfigurationError("I is evaluated at x != 0 only")
    ppd = spec.panels_per_decade
    coarse = _I_once(x, wp.q, wp.p, alpha, ppd)[0]
    for _ in range(spec.max_refinements + 1):
        ppd *= 2
        fine, tail, mass = _I_once(x, wp.q, wp.p, alpha, ppd)
        err = abs(fine - coarse)
        # the two halves of the integrand nearly cancel when q + alpha is close
        # to 1, so the tolerance is taken relative to the integral of |integrand|
        if err <= spec.tol * max(abs(fine), mass):
            return (fine, err, tail) if full else fine
        coarse = fine
    raise QuadratureError(f"I({x}) did not converge", achieved=err / max(abs(fine), 1e-300), value=fine)


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    stderr: float
    lo: float
    hi: float

    def ci95(self):
        return (self.exponent - 1.96 * self.stderr, self.exponent + 1.96 * self.stderr)


def fit_exponent(xs, values) -> ExponentFit:
    """Least-squares slope of ``log|value|`` against ``log x``."""
    xs = np.asarray(xs, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    if xs.size < 3 or np.any(v == 0):
        raise ConfigurationError("exponent fit needs >= 3 nonzero samples")
    r = linregress(np.log(xs), np.log(v))
    return ExponentFit(float(r.slope), float(r.stderr), float(xs.min()), float(xs.max()))


@dataclass
class KernelTable:
    wp: WeightParams
    abscissae: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    tail_bounds: np.ndarray
    small_fit: ExponentFit | None = None
    large_fit: ExponentFit | None = None
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.abscissae)
        if np.any(a <= 0) or np.any(np.diff(a) <= 0):
            raise ConfigurationError("abscissae must be positive and strictly increasing")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["x", "I_value", "tail_bound"])
            for x, v, t in zip(self.abscissae, self.values, self.tail_bounds):
                wr.writerow([f"{x:.17g}", f"{v:.17g}", f"{t:.17g}"])


def kernel_table(wp: WeightParams, x_min=1e-3, x_max=1e3, per_decade=10,
                 small_range=(1e-3, 1e-1), large_range=(10.0, 1e3)) -> KernelTable:
    """Tabulate ``I`` on a log grid and fit the decay exponents at both ends.

    Fits are attempted only on the part of each regime covered by the table.
    The ``K`` constants are the sup of ``|I| |x|^{q+alpha}`` (``x < 1/2``),
    ``|I|`` (``1/2 <= x <= 2``) and ``|I| x^{2+alpha}`` (``x > 2``).
    """
    m = max(3, int(round(np.log10(x_max / x_min) * per_decade)) + 1)
    xs = np.geomspace(x_min, x_max, m)
    res = [I_kernel(x, wp, full=True) for x in xs]
    vals = np.array([r[0] for r in res])
    errs = np.array([r[1] for r in res])
    tails = np.array([r[2] for r in res])

    def fit_on(lo, hi):
        sel = (xs >= lo * (1 - 1e-12)) & (xs <= hi * (1 + 1e-12))
        if sel.sum() < 3 or xs[sel].max() / xs[sel].min() < 10 ** 0.99:
            return None
        return fit_exponent(xs[sel], vals[sel])

    a, q = wp.alpha, wp.q
    consts = {}
    small = xs < 0.5
    mid = (xs >= 0.5) & (xs <= 2)
    large = xs > 2
    if small.any():
        consts["K1"] = float(np.max(np.abs(vals[small]) * xs[small] ** (q + a)))
    if mid.any():
        consts["K3"] = float(np.max(np.abs(vals[mid])))
    if large.any():
        consts["K2"] = float(np.max(np.abs(vals[large]) * xs[large] ** (2 + a)))
    return KernelTable(wp, xs, vals, errs, tails, fit_on(*small_range), fit_on(*large_range), consts)


# ---------------------------------------------------------------------------
# integrability of I^2/W and w^2/W


@dataclass(frozen=True)
class RatioVerdict:
    name: str
    decade_edges: np.ndarray
    decade_integrals: np.ndarray
    slope_at_zero: float  # growth rate of log10(decade integral) per decade, low end
    slope_at_inf: float
    predicted_exponent_zero: float
    predicted_exponent_inf: float
    finite_at_zero: bool | None
    finite_at_inf: bool | None
    integral: float  # sum over the range plus power-law tails when finite

    @property
    def finite(self) -> bool | None:
        if self.finite_at_zero is None or self.finite_at_inf is None:
            return None
        return self.finite_at_zero and self.finite_at_inf

    @property
    def predicted_finite(self) -> bool:
        return self.predicted_exponent_zero > -1 and self.predicted_exponent_inf < -1


@dataclass(frozen=True)
class IntegrabilityReport:
    wp: WeightParams
    alpha: float
    I2_over_W: RatioVerdict
    w2_over_W: RatioVerdict
    c_lower: float | None  # c(q, p) = 1 / (4 int w^2/W)
    C_upper: float | None  # C(q, p) = k^2 int I^2/W

    @property
    def in_window(self) -> bool:
        return self.wp.strict_window


def _verdict(slope, margin):
    if slope > margin:
        return True
    if slope < -margin:
        return False
    return None


def _ratio_verdict(name, func, e0, einf, lo_exp=-4, hi_exp=4, nodes_per_decade=16, margin=0.05):
    gx, gw = np.polynomial.legendre.leggauss(nodes_per_decade)
    ks = np.arange(lo_exp, hi_exp)
    contrib = np.empty(ks.size)
    for i, k in enumerate(ks):
        s = k + 0.5 + 0.5 * gx  # log10 x
        x = 10.0 ** s
        contrib[i] = np.log(10) * 0.5 * np.sum(gw * func(x) * x)
    logc = np.log10(np.abs(contrib))
    s0 = float(np.polyfit(ks[:3], logc[:3], 1)[0])
    sinf = float(np.polyfit(ks[-3:], logc[-3:], 1)[0])
    f0 = _verdict(s0, margin)
    finf = _verdict(-sinf, margin)
    total = float(contrib.sum())
    if f0:
        total += contrib[0] / (10 ** s0 - 1)
    if finf:
        total += contrib[-1] * 10 ** sinf / (1 - 10 ** sinf)
    return RatioVerdict(name, 10.0 ** np.append(ks, hi_exp), contrib, s0, sinf, e0, einf,
                        f0, finf, total)


def integrability_report(wp: WeightParams, alpha=None) -> IntegrabilityReport:
    """Integrate ``I^2/W`` and ``w^2/W`` decade by decade over ``[1e-4, 1e4]``.

    A ratio is declared finite at an end when the decade contributions shrink
    geometrically toward it, divergent when they grow, and undetermined
    (``None``) when the per-decade rate is within 0.05 of neutral.  The
    predicted exponents come from the kernel bounds: ``I ~ |x|^{-q-alpha}``
    near 0 and ``|x|^{-2-alpha}`` at infinity.
    """
    alpha = wp.alpha if alpha is None else alpha
    q, p = wp.q, wp.p
    vec_I = np.vectorize(lambda x: I_kernel(x, wp, alpha))

    def i2w(x):
        return vec_I(x) ** 2 / _W(x, q, p)

    def w2w(x):
        return _w(x, q, p) ** 2 / _W(x, q, p)

    # both ratios are even; integrate x > 0 and double
    iv = _ratio_verdict("I^2/W", lambda x: 2 * i2w(x), 1 - q - 2 * alpha, p - 3 - 2 * alpha)
    wv = _ratio_verdict("w^2/W", lambda x: 2 * w2w(x), 1 - q, 1 - p)
    c = 1.0 / (4.0 * wv.integral) if wv.finite else None
    C = k_alpha_H(alpha) ** 2 * iv.integral if iv.finite else None
    return IntegrabilityReport(wp, alpha, iv, wv, c, C)


def w2_over_W_exact(wp: WeightParams) -> float:
    """Closed form of ``int_R w^2/W`` used to check the numerical value."""
    return 2.0 * (1.0 / (wp.q * (2 - wp.q)) + 1.0 / (wp.p * (wp.p - 2)))


# ---------------------------------------------------------------------------
# field integrals truncated at |z| = L/2


@lru_cache(maxsize=None)
def gregory_weights(order: int = 8) -> np.ndarray:
    """Left-end corrections ``c_j`` so that ``trapezoid + sum c_j f_j`` is exact
    for polynomials of degree ``< order`` (unit spacing)."""
    from scipy.special import bernoulli

    B = bernoulli(order + 1)
    j = np.arange(order, dtype=float)
    A = np.vander(j, order, increasing=True).T
    rhs = np.zeros(order)
    for d in range(1, order, 2):
        rhs[d] = B[d + 1] / (d + 1)
    return np.linalg.solve(A, rhs)


def _gregory_sum(samples, h, order=8):
    c = gregory_weights(order)
    if samples.shape[-1] < 2 * order:
        raise ConfigurationError("too few samples for Gregory endpoint corrections")
    total = samples.sum(axis=-1) - 0.5 * (samples[..., 0] + samples[..., -1])
    total += samples[..., :order] @ c
    total += samples[..., ::-1][..., :order] @ c
    return h * total


class _Centered:
    """Trig interpolant of a field re-expressed around an evaluation point."""

    def __init__(self, u: RealField, x: float):
        g = u.grid
        self.grid = g
        self.x = float(x)
        self.h = g.spacing
        n = g.n_points
        c = np.fft.rfft(u.values) / n
        self.coeffs = c
        kap = g.kappa(np.arange(n // 2 + 1))
        phase = np.exp(1j * kap * (self.x - g.x0))
        # samples at x + m h for m = 0..n-1
        self.samples = np.fft.irfft(c * phase * n, n)
        self.center = float(interpolate((g, c), self.x))

    def at(self, z):
        return interpolate((self.grid, self.coeffs), self.x + np.asarray(z))

    def grid_pair(self, m):
        """Values at ``x + m h`` and ``x - m h`` for integer ``m >= 0``."""
        n = self.grid.n_points
        return self.samples[m % n], self.samples[(-m) % n]


def _field_kernel_integral(u, x, integrand, kernel_pieces, cap_cells=2.0, gregory_order=8):
    """``int_0^{L/2} kernel(z) * integrand(center, u(x+z), u(x-z)) dz``.

    ``kernel_pieces(z)`` returns the kernel; a breakpoint at ``z = 1`` is
    always honoured.  Returns ``(value, near_part, far_part)``.
    """
    c = _Centered(u, x)
    h = c.h
    n = c.grid.n_points
    half = n // 2
    z_half = half * h
    m1 = int(np.ceil(max(1.0, 4 * h) / h)) + gregory_order
    if m1 > half - 2 * gregory_order:
        m1 = half
    z1 = m1 * h
    breaks = [0.0] + ([1.0] if 1.0 < z1 else []) + [z1]
    nodes, weights = [], []
    for i, (lo, hi) in enumerate(zip(breaks[:-1], breaks[1:])):
        edges = graded_edges(lo, hi, grade_left=(i == 0), grade_right=False, per_decade=4,
                             max_width=cap_cells * h)
        t, wt = panel_rule(edges)
        nodes.append(t)
        weights.append(wt)
    t = np.concatenate(nodes)
    wt = np.concatenate(weights)
    plus = c.at(t)
    minus = c.at(-t)
    near = float((kernel_pieces(t) * integrand(c.center, plus, minus)) @ wt)
    far = 0.0
    if m1 < half:
        m = np.arange(m1, half + 1)
        zp, zm = c.grid_pair(m)
        far = float(_gregory_sum(kernel_pieces(m * h) * integrand(c.center, zp, zm), h, gregory_order))
    return near + far, near, far


def J_functional(u: RealField, x: float, wp: WeightParams, full=False):
    """``(J u)(x) = int_{|z| < L/2} w(z) u(x - z) dz`` on the torus.

    ``full=True`` also returns an analytic bound on the neglected tail
    ``|z| > L/2`` assuming ``|u| <= max|u|`` there.
    """
    q, p = wp.q, wp.p

    def integrand(c0, up, um):
        return um - up

    val, _, _ = _field_kernel_integral(u, x, integrand, lambda z: _w(z, q, p))
    if not full:
        return val
    R = u.grid.domain_length / 2
    bound = 2 * np.max(np.abs(u.values)) * (R ** (1 - p) / (p - 1) if R > 1 else np.inf)
    return val, bound


def weighted_square_integral(u: RealField, x: float, wp: WeightParams) -> float:
    """``int_{|z| < L/2} (u(x) - u(x - z))^2 W(z) dz``."""
    q, p = wp.q, wp.p

    def integrand(c0, up, um):
        return (c0 - up) ** 2 + (c0 - um) ** 2

    val, _, _ = _field_kernel_integral(u, x, integrand, lambda z: _W(z, q, p))
    return val
