r"""Run-time diagnostics: conserved quantities, characteristics and the
functionals used in the blow-up arguments.

Along a characteristic ``dx/dt = u(x, t)`` the field obeys
``du/dt = Lambda^alpha H u``.  For ``alpha = 0`` the trajectory value
``J(t) = u(x(t), t)`` satisfies

.. math::

    J_{tt} = \frac{1}{2\pi}\int \frac{(u(x) - u(y))^2}{(x - y)^2}\,dy - J,

and with the weighted functional ``J_w(t) = (J_q^p u)(x(t), t)``

.. math::

    \frac{dJ_w}{dt} = \tfrac12 \int (u(x) - u(y))^2 W(x - y)\,dy
        + J_q^p(\Lambda^\alpha H u)(x) + \text{boundary},

where on the torus the truncated kernel leaves the boundary term
``(L/2)^{-p} (u(x + L/2) - u(x))^2``.  Every record stores both sides of
these identities so they can be checked after the run.

All checks here only exhibit consistency while the field is resolved.  A
numerical run cannot reproduce the contradiction that rules out global
smooth solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, PreconditionError, QuadratureError
from .kernels import J_functional, WeightParams, weighted_square_integral
from .quadrature import dini_integral
from .spectral import (
    GridSpec,
    RealField,
    apply_symbol,
    frac_laplacian,
    interpolate,
    lambda_alpha_H_spectral,
)

__all__ = [
    "Conserved",
    "conserved",
    "DiagRecord",
    "Characteristic",
    "make_record",
    "tail_fraction",
    "dini_at",
    "track_characteristic",
    "SecondDerivativeReport",
    "trajectory_second_derivative_check",
    "OdeReport",
    "ode_inequality_monitor",
    "RiccatiReport",
    "riccati_monitor",
    "BlowupFit",
    "fit_blowup",
    "record_derivative",
]


class Conserved(NamedTuple):
    l2: float
    hamiltonian: float  # H = int (u Lambda^{alpha-1} u / 2 + u^3 / 6)
    display: float  # int (u^3 / 3 + (Lambda^{(alpha-1)/2} u)^2) = 2 H
    mean: float


def conserved(u: RealField, alpha: float) -> Conserved:
    """L2 norm, Hamiltonian and the conserved display on the torus."""
    h = u.grid.spacing
    v = u.values
    if np.any(v):
        scale = np.max(np.abs(v))
        if abs(u.mean()) > 1e-10 * scale:
            raise PreconditionError(f"conserved quantities need mean-free input, mean = {u.mean():.3e}")
        v = v - u.mean()
        lam = frac_laplacian(RealField(u.grid, v), alpha - 1.0).values
    else:
        lam = np.zeros_like(v)
    quad = h * float(np.sum(v * lam))
    cubic = h * float(np.sum(v ** 3))
    l2 = math.sqrt(h * float(np.sum(v ** 2)))
    return Conserved(l2, 0.5 * quad + cubic / 6.0, quad + cubic / 3.0, u.mean())


def tail_fraction(u: RealField) -> float:
    """Energy fraction in the top third of the retained band ``(2K/3, K]``,
    ``K = n // 3``; zero for the zero field."""
    n = u.grid.n_points
    e = np.abs(np.fft.rfft(u.values)[1:]) ** 2
    k = np.arange(1, n // 2 + 1)
    K = n // 3
    total = e.sum()
    if total == 0:
        return 0.0
    band = (k > 2 * K / 3) & (k <= K)
    return float(e[band].sum() / total)


def dini_at(u: RealField, x: float) -> float:
    """Dini integral at an arbitrary point, via the field translated so that
    ``x`` sits on the first node."""
    g = u.grid
    n = g.n_points
    c = np.fft.rfft(u.values)
    phase = np.exp(1j * g.kappa(np.arange(n // 2 + 1)) * (x - g.x0))
    if n % 2 == 0:
        # keep the Nyquist term as the real cosine the interpolant uses
        c = c.copy()
        c[-1] = c[-1].real
    samples = np.fft.irfft(c * phase, n)
    return dini_integral(RealField(g, samples), 0)


@dataclass(frozen=True)
class DiagRecord:
    t: float
    l2_norm: float
    hamiltonian: float
    display: float
    mean: float
    u_max: float
    u_min: float
    ux_max: float
    tail_fraction: float
    x_traj: float = math.nan
    J_traj: float = math.nan
    HJ_traj: float = math.nan  # Lambda^alpha H u at the characteristic
    dini_at_traj: float = math.nan
    J_weight: float = math.nan
    dJweight_dt_rhs: float = math.nan  # right-hand side of the weighted identity
    quad_term: float = math.nan  # 1/2 int (u(x) - u(y))^2 W
    boundary_term: float = math.nan
    nonlinear_lhs: float = math.nan  # -1/2 J((u^2)_x) + u d_x J u

    def __post_init__(self):
        if self.l2_norm < 0:
            raise ConfigurationError("l2_norm must be non-negative")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class Characteristic:
    """A tracked trajectory ``dx/dt = u``; positions are kept unwrapped."""

    beta0: float
    x: float = math.nan
    history: list = field(default_factory=list)  # (t, x, u, Lambda^alpha H u)

    def __post_init__(self):
        if math.isnan(self.x):
            self.x = float(self.beta0)


def _wrap(x, grid: GridSpec):
    L = grid.domain_length
    return (x - grid.x0) % L + grid.x0


def _padded_square_derivative(u: RealField) -> RealField:
    """``(u^2)_x`` on a grid twice as fine, free of aliasing for ``|k| <= n/2``."""
    g = u.grid
    n = g.n_points
    fine = GridSpec(2 * n, g.domain_length)
    c = np.fft.rfft(u.values) / n
    cf = np.zeros(n + 1, dtype=complex)
    cf[: n // 2 + 1] = c
    cf[n // 2] = c[-1].real / 2.0  # split the Nyquist cosine between +-n/2
    uf = np.fft.irfft(cf * 2 * n, 2 * n)
    sq = apply_symbol(uf * uf, g.domain_length, lambda k: 1j * k, odd=True)
    return RealField(fine, sq)


def make_record(t: float, u: RealField, alpha: float, x_traj=None,
                wp: WeightParams | None = None, check_nonlinear=True) -> DiagRecord:
    """Evaluate every diagnostic on one snapshot."""
    cons = conserved(u, alpha)
    ux = apply_symbol(u.values, u.grid.domain_length, lambda k: 1j * k, odd=True)
    base = dict(t=float(t), l2_norm=cons.l2, hamiltonian=cons.hamiltonian, display=cons.display,
                mean=cons.mean, u_max=float(u.values.max()), u_min=float(u.values.min()),
                ux_max=float(np.max(np.abs(ux))), tail_fraction=tail_fraction(u))
    if x_traj is None:
        return DiagRecord(**base)
    x = float(x_traj)
    g = u.grid
    LH = lambda_alpha_H_spectral(u, alpha)
    base.update(x_traj=x, J_traj=float(interpolate(u, x)), HJ_traj=float(interpolate(LH, x)),
                dini_at_traj=dini_at(u, x))
    if wp is not None:
        xw = float(_wrap(x, g))
        base["J_weight"] = J_functional(u, xw, wp)
        quad = 0.5 * weighted_square_integral(u, xw, wp)
        R = g.domain_length / 2
        ux_here = float(interpolate(u, xw))
        opposite = float(interpolate(u, xw + R))
        boundary = R ** (-wp.p) * (opposite - ux_here) ** 2 if R > 1 else math.nan
        base.update(quad_term=quad, boundary_term=boundary,
                    dJweight_dt_rhs=quad + boundary + J_functional(LH, xw, wp))
        if check_nonlinear:
            jsq = J_functional(_padded_square_derivative(u), xw, wp)
            jux = J_functional(RealField(g, ux), xw, wp)
            base["nonlinear_lhs"] = -0.5 * jsq + ux_here * jux
    return DiagRecord(**base)


def track_characteristic(state, char: Characteristic, dt: float, alpha: float,
                         nonlinear: bool = True) -> Characteristic:
    """Advance ``char`` from ``state.t`` by ``dt`` with the field's own RK4 stages.

    The history gains ``(t, x, u(x), Lambda^alpha H u(x))`` at the new time
    (and at the start time on the first call).
    """
    from .solver import rk4_step, rhs_spectral

    g = state.u.grid
    uh = np.fft.rfft(state.u.values)
    new, xs = rk4_step(uh, dt, rhs_spectral(g, alpha, nonlinear), g, np.array([char.x]))
    x_new = float(xs[0])
    if not math.isfinite(x_new):
        raise FloatingPointError("characteristic position became non-finite")

    def entry(t, u, x):
        return (t, x, float(interpolate(u, x)), float(interpolate(lambda_alpha_H_spectral(u, alpha), x)))

    if not char.history:
        char.history.append(entry(state.t, state.u, char.x))
    char.x = x_new
    char.history.append(entry(state.t + dt, RealField(g, np.fft.irfft(new, g.n_points)), x_new))
    return char


# ---------------------------------------------------------------------------
# finite differences on record sequences


def _arr(records, name):
    return np.array([getattr(r, name) for r in records], dtype=float)


def record_derivative(t, y, order=1):
    """Central differences on a non-uniform grid at interior points."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    hm = t[1:-1] - t[:-2]
    hp = t[2:] - t[1:-1]
    if order == 1:
        return (hm ** 2 * y[2:] + (hp ** 2 - hm ** 2) * y[1:-1] - hp ** 2 * y[:-2]) / (hm * hp * (hm + hp))
    if order == 2:
        return 2 * (hm * y[2:] - (hm + hp) * y[1:-1] + hp * y[:-2]) / (hm * hp * (hm + hp))
    raise ValueError("order must be 1 or 2")


def _rel(a, b, floor):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


@dataclass(frozen=True)
class SecondDerivativeReport:
    t: np.ndarray
    lhs: np.ndarray  # central second difference of J
    rhs: np.ndarray  # dini - J
    discrepancy: np.ndarray

    @property
    def max_discrepancy(self) -> float:
        return float(np.max(self.discrepancy)) if self.discrepancy.size else 0.0


def trajectory_second_derivative_check(records: Sequence[DiagRecord], floor=None) -> SecondDerivativeReport:
    """Compare the second difference of ``J_traj`` with ``dini - J`` (``alpha = 0``).

    The discrepancy is relative to the larger of the two sides, floored at
    ``floor`` (default: 1e-12 times the largest right-hand side magnitude).
    """
    if len(records) < 5:
        raise ConfigurationError("need at least 5 consecutive records")
    t = _arr(records, "t")
    J = _arr(records, "J_traj")
    lhs = record_derivative(t, J, 2)
    rhs = (_arr(records, "dini_at_traj") - J)[1:-1]
    if floor is None:
        floor = max(1e-12 * float(np.max(np.abs(rhs), initial=0.0)), 1e-300)
    return SecondDerivativeReport(t[1:-1], lhs, rhs, _rel(lhs, rhs, floor))


@dataclass(frozen=True)
class OdeReport:
    C: float
    t: np.ndarray
    jtt_bound: np.ndarray  # second difference of J >= C J^4 - J (interior records)
    jtt_margin: np.ndarray
    jt_bound: np.ndarray  # J_t >= integrated lower bound
    jt_margin: np.ndarray
    jt_positive: np.ndarray
    j_increasing: np.ndarray
    first_violation: tuple | None  # (time, which)

    @property
    def all_hold(self) -> bool:
        return self.first_violation is None


def ode_inequality_monitor(records: Sequence[DiagRecord], E: float, rtol=1e-9) -> OdeReport:
    """Check the ``alpha = 0`` differential inequalities along a trajectory.

    ``C = 1 / (32 pi E)``.  The first form compares the second difference of
    ``J`` with ``C J^4 - J``; the integrated form compares ``J_t`` (the
    recorded ``H u`` at the characteristic) with
    ``sqrt(J_t(0)^2 + 2C/5 (J^5 - J(0)^5) - (J^2 - J(0)^2))``.
    Violations are returned as data.
    """
    if len(records) < 3:
        raise ConfigurationError("need at least 3 records")
    C = 1.0 / (32.0 * math.pi * E)
    t = _arr(records, "t")
    J = _arr(records, "J_traj")
    Jt = _arr(records, "HJ_traj")
    jtt = record_derivative(t, J, 2)
    rhs_tt = C * J[1:-1] ** 4 - J[1:-1]
    m_tt = jtt - rhs_tt
    jtt_ok = np.concatenate([[True], m_tt >= -rtol * np.maximum(np.abs(rhs_tt), np.abs(jtt)), [True]])
    radicand = Jt[0] ** 2 + 0.4 * C * (J ** 5 - J[0] ** 5) - (J ** 2 - J[0] ** 2)
    bound = np.sqrt(np.maximum(radicand, 0.0))
    m_t = Jt - bound
    jt_ok = m_t >= -rtol * np.maximum(np.abs(Jt), bound)
    pos = Jt > 0
    inc = np.concatenate([[True], np.diff(J) > 0])
    first = None
    for i in range(len(records)):
        for name, ok in (("J_tt bound", jtt_ok[i]), ("J_t bound", jt_ok[i]),
                         ("J_t > 0", pos[i]), ("J increasing", inc[i])):
            if not ok:
                first = (float(t[i]), name)
                break
        if first:
            break
    return OdeReport(C, t, jtt_ok, np.concatenate([[np.nan], m_tt, [np.nan]]), jt_ok, m_t, pos, inc, first)


@dataclass(frozen=True)
class RiccatiReport:
    t: np.ndarray
    fd_derivative: np.ndarray
    rhs: np.ndarray
    identity_discrepancy: np.ndarray  # (i)
    inequality_holds: np.ndarray  # (ii)
    nonlinear_discrepancy: np.ndarray  # (iii)
    quad_nonnegative: np.ndarray

    @property
    def max_identity_discrepancy(self) -> float:
        return float(np.max(self.identity_discrepancy)) if self.identity_discrepancy.size else 0.0


def riccati_monitor(records: Sequence[DiagRecord], wp: WeightParams, c: float, C: float,
                    floor=None) -> RiccatiReport:
    """Check the weighted identity, the Riccati inequality and the nonlinear
    rewriting at every interior record."""
    if not 0 < wp.alpha < 1:
        raise ConfigurationError("the weighted functional monitor needs 0 < alpha < 1")
    if len(records) < 3:
        raise ConfigurationError("need at least 3 records")
    t = _arr(records, "t")
    Jw = _arr(records, "J_weight")
    rhs = _arr(records, "dJweight_dt_rhs")
    if np.any(np.isnan(Jw)) or np.any(np.isnan(rhs)):
        raise QuadratureError("records carry no weighted-functional data")
    fd = record_derivative(t, Jw, 1)
    r = rhs[1:-1]
    if floor is None:
        floor = max(1e-12 * float(np.max(np.abs(r), initial=0.0)), 1e-300)
    quad = _arr(records, "quad_term")
    bnd = _arr(records, "boundary_term")
    lhs3 = _arr(records, "nonlinear_lhs")
    rhs3 = quad + bnd
    floor3 = max(1e-12 * float(np.max(np.abs(rhs3), initial=0.0)), 1e-300)
    return RiccatiReport(
        t[1:-1], fd, r, _rel(fd, r, floor),
        fd >= c * Jw[1:-1] ** 2 - C,
        _rel(lhs3, rhs3, floor3),
        quad >= 0,
    )


@dataclass(frozen=True)
class BlowupFit:
    """Ansatz ``max|u_x| ~ A / (T - t)``; not a proven rate."""

    T_est: float
    amplitude: float
    window: tuple
    residual: float
    label: str = "ansatz: max|u_x| ~ A/(T - t)"


def fit_blowup(records, window=None) -> BlowupFit:
    """Least-squares line through ``1/ux_max`` against ``t``.

    ``records`` is a sequence of :class:`DiagRecord` or a ``(t, ux_max)`` pair
    of arrays.  ``window=(t0, t1)`` restricts the fit.
    """
    if isinstance(records, tuple) and len(records) == 2 and not isinstance(records[0], DiagRecord):
        t, ux = (np.asarray(a, dtype=float) for a in records)
    else:
        t = _arr(records, "t")
        ux = _arr(records, "ux_max")
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, ux = t[sel], ux[sel]
    if t.size < 8:
        raise ConfigurationError("blow-up fit needs at least 8 records")
    if np.any(np.diff(ux) <= 0):
        raise ConfigurationError("blow-up fit needs strictly increasing ux_max")
    y = 1.0 / ux
    slope, icpt = np.polyfit(t, y, 1)
    if slope >= 0:
        raise ConfigurationError("1/ux_max is not decreasing; no finite-time fit")
    T = -icpt / slope
    res = float(np.sqrt(np.mean((slope * t + icpt - y) ** 2)))
    if T <= t[-1]:
        raise ConfigurationError(f"fitted T = {T} precedes the last fitted time")
    return BlowupFit(float(T), float(-1.0 / slope), (float(t[0]), float(t[-1])), res)
