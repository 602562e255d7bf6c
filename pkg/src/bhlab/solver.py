"""Pseudospectral time stepping for ``u_t + u u_x = Lambda^alpha H u``.

The nonlinearity is taken in conservative form ``1/2 (u^2)_x`` with the 2/3
rule.  Initial data are projected onto the retained band ``|k| <= n // 3``;
the band is then invariant, and the discrete L2 norm and Hamiltonian are
conserved by the semi-discrete scheme, so their drift measures time-stepping
error only.  Time stepping is classical RK4.  A tracked characteristic is
integrated inside the same RK4 stages, with the stage fields evaluated at
off-grid positions by trigonometric interpolation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Union

import numpy as np

from . import diagnostics as dg
from .errors import ConfigurationError, SchemeDivergenceError
from .kernels import WeightParams
from .spectral import GridSpec, RealField, dealias_cutoff, interpolate

log = logging.getLogger(__name__)

__all__ = [
    "RationalFamily",
    "SingleMode",
    "GaussianBump",
    "RandomBandlimited",
    "FromFile",
    "InitialDataSpec",
    "initial_field",
    "FixedStep",
    "CFLStep",
    "StopCriteria",
    "SimConfig",
    "SolverState",
    "RunReport",
    "ListSink",
    "rhs",
    "rhs_spectral",
    "rk4_step",
    "initial_state",
    "step",
    "run",
]


# ---------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class RationalFamily:
    """``u0(x) = -a x / (1 + (b x)^2)``.

    With ``periodize=True`` the samples are the symmetric lattice sum of
    ``u0`` over the period ``L``, which has the closed form
    ``-(a / b^2) (pi / L) sin(2 pi x / L) / (cosh(2 pi / (b L)) - cos(2 pi x / L))``.
    """

    a: float
    b: float
    periodize: bool = True

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ConfigurationError(f"RationalFamily needs a, b > 0, got a={self.a}, b={self.b}")

    def __call__(self, x, L=None):
        a, b = self.a, self.b
        if not self.periodize or L is None:
            return -a * x / (1.0 + (b * x) ** 2)
        th = 2.0 * np.pi * x / L
        return -(a / b ** 2) * (np.pi / L) * np.sin(th) / (np.cosh(2.0 * np.pi / (b * L)) - np.cos(th))

    def hilbert(self, x):
        """Whole-line ``H u0 = (a / b) / (1 + (b x)^2)``."""
        return (self.a / self.b) / (1.0 + (self.b * x) ** 2)

    @property
    def l2_squared(self) -> float:
        """Whole-line ``E = pi a^2 / (2 b^3)``."""
        return math.pi * self.a ** 2 / (2.0 * self.b ** 3)

    @property
    def beta0(self) -> float:
        return -1.0 / self.b


@dataclass(frozen=True)
class SingleMode:
    """``amplitude * sin(2 pi k x / L)``."""

    amplitude: float
    wavenumber: int = 1

    def __call__(self, x, L):
        return self.amplitude * np.sin(2.0 * np.pi * self.wavenumber * x / L)


@dataclass(frozen=True)
class GaussianBump:
    amplitude: float
    width: float
    center: float = 0.0

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigurationError("GaussianBump width must be positive")

    def __call__(self, x, L=None):
        return self.amplitude * np.exp(-(((x - self.center) / self.width) ** 2))


@dataclass(frozen=True)
class RandomBandlimited:
    """Seeded random trigonometric polynomial of degree ``kmax``; the
    amplitude of mode ``k`` has standard deviation ``amplitude / k^decay``."""

    seed: int = 0
    kmax: int = 8
    decay: float = 1.0
    amplitude: float = 1.0

    def __call__(self, x, L):
        rng = np.random.default_rng(self.seed)
        k = np.arange(1, self.kmax + 1)
        amp = self.amplitude * rng.normal(size=self.kmax) / k ** self.decay
        ph = rng.uniform(0.0, 2.0 * np.pi, self.kmax)
        return np.sum(amp * np.cos(np.outer(x, 2.0 * np.pi * k / L) + ph), axis=1)


@dataclass(frozen=True)
class FromFile:
    path: str


InitialDataSpec = Union[RationalFamily, SingleMode, GaussianBump, RandomBandlimited, FromFile]


def initial_field(spec: InitialDataSpec, grid: GridSpec) -> RealField:
    """Sample the initial data; the mean is removed (with a warning) if it
    exceeds 1e-12."""
    if isinstance(spec, FromFile):
        from .io import read_field

        f = read_field(spec.path)
        if f.grid != grid:
            raise ConfigurationError(f"field file grid {f.grid} does not match configured grid {grid}")
        vals = f.values.copy()
    else:
        vals = np.asarray(spec(grid.nodes, grid.domain_length), dtype=float)
    m = float(np.mean(vals))
    if abs(m) > 1e-12:
        log.warning("initial data has mean %.3e; subtracting it", m)
        vals = vals - m
    return RealField(grid, vals)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class FixedStep:
    dt: float

    def __post_init__(self):
        if not (self.dt != 0 and math.isfinite(self.dt)):
            raise ConfigurationError("fixed dt must be finite and nonzero")


@dataclass(frozen=True)
class CFLStep:
    """``dt = sigma * h / (max|u| + 1)``."""

    sigma: float = 0.5

    def __post_init__(self):
        if not 0 < self.sigma <= 1:
            raise ConfigurationError(f"CFL safety factor must lie in (0, 1], got {self.sigma}")


@dataclass(frozen=True)
class StopCriteria:
    max_slope_factor: float = 100.0
    spectral_tail_fraction: float = 1e-4
    t_max: float | None = None  # optional cap in addition to SimConfig.t_max

    def __post_init__(self):
        if not self.max_slope_factor > 1:
            raise ConfigurationError("max_slope_factor must exceed 1")
        if not 0 < self.spectral_tail_fraction < 1:
            raise ConfigurationError("spectral_tail_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class SimConfig:
    alpha: float
    grid: GridSpec
    t_max: float
    dt_policy: Union[FixedStep, CFLStep] = CFLStep()
    initial_data: InitialDataSpec = SingleMode(0.01)
    diag_every: int = 1
    stop: StopCriteria = StopCriteria()
    beta0: float | None = None
    weights: WeightParams | None = None
    nonlinear: bool = True  # test hook: False integrates the linear part only
    check_nonlinear_identity: bool = True

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ConfigurationError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not (self.t_max >= 0 and math.isfinite(self.t_max)):
            raise ConfigurationError(f"t_max must be finite and non-negative, got {self.t_max}")
        if self.diag_every < 1:
            raise ConfigurationError("diag_every must be a positive integer")

    @property
    def resolved_beta0(self) -> float | None:
        if self.beta0 is not None:
            return float(self.beta0)
        if isinstance(self.initial_data, RationalFamily):
            return self.initial_data.beta0
        return None


@dataclass(frozen=True)
class SolverState:
    t: float
    u: RealField
    step_count: int = 0
    last_dt: float = 0.0
    x_traj: float | None = None


# ---------------------------------------------------------------------------
# right-hand side


class rhs_spectral:
    """Right-hand side on unnormalised real-FFT coefficients."""

    def __init__(self, grid: GridSpec, alpha: float, nonlinear: bool = True):
        n = grid.n_points
        k = np.arange(n // 2 + 1)
        kap = grid.kappa(k)
        self.n = n
        self.mask = k <= dealias_cutoff(n)
        self.ik = 1j * kap * self.mask
        lin = np.zeros(k.size, dtype=complex)
        lin[1:] = -1j * kap[1:] ** alpha
        lin[-1] = 0.0
        self.lin = lin
        self.nonlinear = nonlinear

    def __call__(self, uh):
        out = self.lin * uh
        if self.nonlinear:
            u = np.fft.irfft(uh, self.n)
            out = out - 0.5 * self.ik * np.fft.rfft(u * u)
        return out


def rhs(u: RealField, alpha: float, nonlinear: bool = True) -> RealField:
    """``-1/2 d_x P(u^2) + Lambda^alpha H u`` with ``P`` the 2/3-rule projection."""
    if not 0 <= alpha <= 1:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")
    f = rhs_spectral(u.grid, alpha, nonlinear)
    return RealField(u.grid, np.fft.irfft(f(np.fft.rfft(u.values)), u.grid.n_points))


def _velocity(uh, grid, xs):
    return interpolate((grid, uh / grid.n_points), xs)


def rk4_step(uh, dt, f, grid, xs=None):
    """One classical RK4 step for the coefficients and, optionally, for
    characteristic positions ``xs`` driven by the stage fields."""
    k1 = f(uh)
    s2 = uh + 0.5 * dt * k1
    k2 = f(s2)
    s3 = uh + 0.5 * dt * k2
    k3 = f(s3)
    s4 = uh + dt * k3
    k4 = f(s4)
    new = uh + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if xs is None:
        return new, None
    v1 = _velocity(uh, grid, xs)
    v2 = _velocity(s2, grid, xs + 0.5 * dt * v1)
    v3 = _velocity(s3, grid, xs + 0.5 * dt * v2)
    v4 = _velocity(s4, grid, xs + dt * v3)
    return new, xs + (dt / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4)


def _project(u: RealField) -> RealField:
    n = u.grid.n_points
    c = np.fft.rfft(u.values)
    c[np.arange(c.size) > dealias_cutoff(n)] = 0.0
    c[0] = 0.0
    return RealField(u.grid, np.fft.irfft(c, n))


def initial_state(cfg: SimConfig) -> SolverState:
    """Sampled, mean-free initial data projected onto the retained band."""
    u = _project(initial_field(cfg.initial_data, cfg.grid))
    return SolverState(0.0, u, 0, 0.0, cfg.resolved_beta0)


def _dt(policy, u_values, h):
    if isinstance(policy, FixedStep):
        return policy.dt
    return policy.sigma * h / (float(np.max(np.abs(u_values))) + 1.0)


def step(state: SolverState, cfg: SimConfig, dt: float | None = None) -> SolverState:
    """Advance one RK4 step (``dt`` overrides the policy, e.g. to step backwards)."""
    g = state.u.grid
    if dt is None:
        dt = _dt(cfg.dt_policy, state.u.values, g.spacing)
    f = rhs_spectral(g, cfg.alpha, cfg.nonlinear)
    xs = None if state.x_traj is None else np.array([state.x_traj])
    with np.errstate(over="ignore", invalid="ignore"):
        uh, xs = rk4_step(np.fft.rfft(state.u.values), dt, f, g, xs)
    vals = np.fft.irfft(uh, g.n_points)
    if not np.all(np.isfinite(vals)) or (xs is not None and not np.all(np.isfinite(xs))):
        raise SchemeDivergenceError(f"non-finite state after step {state.step_count + 1} at t = {state.t + dt}")
    x_new = None if xs is None else float(xs[0])
    return SolverState(state.t + dt, RealField(g, vals), state.step_count + 1, dt, x_new)


# ---------------------------------------------------------------------------
# driver


class DiagSink(Protocol):
    def emit(self, record: dg.DiagRecord) -> None: ...


class ListSink:
    def __init__(self):
        self.records: list[dg.DiagRecord] = []

    def emit(self, record):
        self.records.append(record)


@dataclass
class RunReport:
    stop_reason: str  # t_max | slope_factor | tail_fraction | scheme_divergence
    t_final: float
    steps: int
    initial_ux_max: float
    final_ux_max: float
    final_state: SolverState
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (t, values)
    blowup_fit: dg.BlowupFit | None = None
    message: str = ""
    record_steps: list = field(default_factory=list)
    diag_every: int = 1

    def cadence_records(self) -> list:
        """Records taken on the fixed step cadence; the extra record at a stop
        or at ``t_max`` is left out so that finite differences see a regular
        sampling."""
        return [r for r, s in zip(self.records, self.record_steps) if s % self.diag_every == 0]

    def summary(self) -> str:
        lines = [
            f"stop_reason = {self.stop_reason}",
            f"t_final = {self.t_final:.17g}",
            f"steps = {self.steps}",
            f"initial_ux_max = {self.initial_ux_max:.17g}",
            f"final_ux_max = {self.final_ux_max:.17g}",
            f"slope_ratio = {self.final_ux_max / self.initial_ux_max if self.initial_ux_max else math.nan:.17g}",
        ]
        if self.blowup_fit is not None:
            b = self.blowup_fit
            lines += [f"blowup_fit = {b.label}", f"blowup_T_est = {b.T_est:.17g}",
                      f"blowup_amplitude = {b.amplitude:.17g}", f"blowup_residual = {b.residual:.17g}"]
        if self.message:
            lines.append(f"message = {self.message}")
        lines.append("note = inequalities holding on resolved records show consistency only")
        return "\n".join(lines) + "\n"


def run(cfg: SimConfig, sink: DiagSink | None = None, n_snapshots: int = 6) -> RunReport:
    """Integrate until ``t_max`` or a stop criterion fires.

    A record is emitted at the initial time, every ``diag_every`` steps and at
    the final time.  Scheme divergence ends the run with its own stop reason.
    """
    sink = sink if sink is not None else ListSink()
    records = []
    record_steps = []

    def emit(st):
        rec = dg.make_record(st.t, st.u, cfg.alpha, st.x_traj, cfg.weights, cfg.check_nonlinear_identity)
        records.append(rec)
        record_steps.append(st.step_count)
        sink.emit(rec)

    state = initial_state(cfg)
    g = cfg.grid
    f = rhs_spectral(g, cfg.alpha, cfg.nonlinear)
    ik = 1j * g.kappa(np.arange(g.n_points // 2 + 1))
    ik[-1] = 0.0
    uh = np.fft.rfft(state.u.values)
    ux0 = float(np.max(np.abs(np.fft.irfft(ik * uh, g.n_points))))
    t_end = cfg.t_max if cfg.stop.t_max is None else min(cfg.t_max, cfg.stop.t_max)
    snap_times = np.linspace(0.0, t_end, n_snapshots) if n_snapshots > 1 else np.array([0.0])
    snapshots = [(0.0, state.u.values.copy())]
    emit(state)

    reason, message = "t_max", ""
    t = 0.0
    steps = 0
    x = None if state.x_traj is None else np.array([state.x_traj])
    ux = ux0
    last_emitted = 0
    while t < t_end:
        u_vals = np.fft.irfft(uh, g.n_points)
        dt = _dt(cfg.dt_policy, u_vals, g.spacing)
        final = t + dt >= t_end * (1 - 1e-14)
        if final:
            dt = t_end - t
        with np.errstate(over="ignore", invalid="ignore"):
            uh_new, x_new = rk4_step(uh, dt, f, g, x)
        if not np.all(np.isfinite(uh_new)) or (x_new is not None and not np.all(np.isfinite(x_new))):
            reason, message = "scheme_divergence", f"non-finite state at step {steps + 1}"
            break
        uh, x = uh_new, x_new
        t = t_end if final else t + dt
        steps += 1
        vals = np.fft.irfft(uh, g.n_points)
        ux = float(np.max(np.abs(np.fft.irfft(ik * uh, g.n_points))))
        e = np.abs(uh[1:]) ** 2
        kk = np.arange(1, uh.size)
        K = dealias_cutoff(g.n_points)
        tot = e.sum()
        tail = float(e[(kk > 2 * K / 3) & (kk <= K)].sum() / tot) if tot > 0 else 0.0
        stop = None
        if ux0 > 0 and ux >= cfg.stop.max_slope_factor * ux0:
            stop = "slope_factor"
        elif tail > cfg.stop.spectral_tail_fraction:
            stop = "tail_fraction"
        st = SolverState(t, RealField(g, vals), steps, dt, None if x is None else float(x[0]))
        if len(snapshots) < len(snap_times) and t >= snap_times[len(snapshots)] - 1e-12 * max(t_end, 1):
            snapshots.append((t, vals.copy()))
        if stop or final or steps % cfg.diag_every == 0:
            emit(st)
            last_emitted = steps
        if stop:
            reason = stop
            break
    final_state = SolverState(t, RealField(g, np.fft.irfft(uh, g.n_points)), steps, 0.0,
                              None if x is None else float(x[0]))
    if reason != "scheme_divergence" and last_emitted != steps:
        emit(final_state)
    if snapshots[-1][0] != t:
        snapshots.append((t, final_state.u.values.copy()))

    fit = None
    if reason == "slope_factor":
        tail_recs = [r for r in records if r.tail_fraction <= cfg.stop.spectral_tail_fraction]
        try:
            fit = dg.fit_blowup(tail_recs[-12:])
        except ConfigurationError as exc:
            message = f"blow-up fit unavailable: {exc}"
    return RunReport(reason, t, steps, ux0, ux, final_state, records, snapshots, fit, message,
                     record_steps, cfg.diag_every)
