r"""Real-space evaluation of the singular integrals behind the equation.

Every operator here is an independent route to something :mod:`bhlab.spectral`
computes with Fourier multipliers:

* :func:`lambda_alpha`   -- :math:`k_\alpha \int (f(x)-f(y))|x-y|^{-1-\alpha} dy`
* :func:`lambda_alpha_H` -- the signed-kernel form of :math:`\Lambda^\alpha H`
* :func:`hilbert_pv`     -- :math:`\frac1\pi \mathrm{P.V.}\int f(y)/(x-y)\,dy`
* :func:`dini_integral`  -- :math:`\frac1{2\pi}\int (u(x)-u(y))^2/(x-y)^2 dy`

Integrals are folded onto :math:`t = |x-y| \ge 0` by symmetric pairing of
``x+t`` and ``x-t``.  The piece :math:`t < \varepsilon` is replaced by its
leading Taylor term (second difference for even pairings, first difference
for odd ones); :math:`[\varepsilon, R]` is covered by geometrically graded
Gauss-Legendre panels; beyond :math:`R` an algebraic tail correction is
added.  Functions that are periodic are integrated over one period against
the lattice-summed kernel instead, which is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma, zeta

from .errors import ConfigurationError, PreconditionError, QuadratureError
from .spectral import GridSpec, RealField

__all__ = [
    "QuadratureSpec",
    "QuadResult",
    "k_alpha",
    "k_alpha_H",
    "lambda_alpha",
    "lambda_alpha_H",
    "hilbert_pv",
    "dini_integral",
    "dini_all",
    "central_derivative",
    "graded_edges",
    "panel_rule",
]

GL_ORDER = 16
_GX, _GW = np.polynomial.legendre.leggauss(GL_ORDER)


@dataclass(frozen=True)
class QuadratureSpec:
    """Cut-offs and resolution for the singular quadratures.

    ``inner_cut`` is the radius below which the integrand is replaced by its
    Taylor term, ``outer_cut`` the radius beyond which the tail is handled
    analytically.  ``tol`` is the accepted refinement discrepancy, relative to
    ``max(1, |value|)``.
    """

    inner_cut: float = 1e-4
    outer_cut: float = 1e6
    panels_per_decade: int = 32
    tail_correction: bool = True
    tol: float = 1e-8
    max_refinements: int = 2

    def __post_init__(self):
        if not 0 < self.inner_cut < 1 < self.outer_cut:
            raise ConfigurationError(
                f"need 0 < inner_cut < 1 < outer_cut, got {self.inner_cut}, {self.outer_cut}"
            )
        if self.panels_per_decade < 8:
            raise ConfigurationError("panels_per_decade must be >= 8")

    @classmethod
    def for_grid(cls, grid: GridSpec, **kw) -> "QuadratureSpec":
        """Defaults tied to a grid: ``eps = h/2`` and ``R = L/2``."""
        return cls(inner_cut=min(grid.spacing / 2, 0.5), outer_cut=max(grid.domain_length / 2, 1.5), **kw)


@dataclass(frozen=True)
class QuadResult:
    value: np.ndarray
    error: np.ndarray
    tail_bound: np.ndarray


def k_alpha(alpha):
    """Constant of the singular-integral form of ``Lambda^alpha`` on the line."""
    return gamma(1 + alpha) * math.cos((1 - alpha) * math.pi / 2) / math.pi


def k_alpha_H(alpha):
    """Constant of the signed-kernel form of ``Lambda^alpha H``."""
    return -gamma(1 + alpha) * math.sin((1 + alpha) * math.pi / 2) / math.pi


# ---------------------------------------------------------------------------
# panel rules


def graded_edges(a, b, grade_left=True, grade_right=True, per_decade=8, min_rel=1e-13,
                 max_width=None):
    """Panel edges on ``[a, b]`` graded geometrically toward marked endpoints.

    Grading stops once a panel would be narrower than ``min_rel`` times the
    endpoint magnitude; the final sliver is covered by one panel.  ``max_width``
    caps the panel width (used where the integrand oscillates on grid scale).
    """
    if b <= a:
        return np.array([a, b])
    if grade_left and grade_right:
        m = 0.5 * (a + b)
        left = graded_edges(a, m, True, False, per_decade, min_rel, max_width)
        right = graded_edges(m, b, False, True, per_decade, min_rel, max_width)
        return np.concatenate([left, right[1:]])
    width = b - a
    if grade_left or grade_right:
        anchor = abs(a) if grade_left else abs(b)
        floor = max(min_rel * max(anchor, width), 1e-300)
        depth = max(1, int(np.floor(np.log10(width / floor) * per_decade)))
        r = 10.0 ** (-np.arange(depth + 1) / per_decade)
        if grade_left:
            edges = np.concatenate([[a], a + width * r[::-1]])
        else:
            edges = np.concatenate([b - width * r, [b]])
    else:
        edges = np.array([a, b])
    if max_width is not None:
        edges = _cap_width(edges, max_width)
    return edges


def _cap_width(edges, max_width):
    out = [edges[0]]
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = int(np.ceil((hi - lo) / max_width))
        if m > 1:
            out.extend(np.linspace(lo, hi, m + 1)[1:])
        else:
            out.append(hi)
    return np.asarray(out)


def geometric_edges(a, b, per_decade):
    """Edges with a fixed number of panels per decade on ``[a, b]``, ``a > 0``."""
    m = max(1, int(np.ceil(np.log10(b / a) * per_decade)))
    return np.geomspace(a, b, m + 1)


def panel_rule(edges):
    """Composite Gauss-Legendre nodes and weights on consecutive panels."""
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * _GX[None, :]
    weights = half[:, None] * _GW[None, :]
    return nodes.ravel(), weights.ravel()


# ---------------------------------------------------------------------------
# lattice-summed kernels for periodic integrands


def _periodic_remainder_even(t, s, L):
    """``sum_{n != 0} |t + nL|^{-s}`` for ``|t| < L``."""
    u = np.asarray(t, dtype=float) / L
    return L ** (-s) * (zeta(s, 1 + u) + zeta(s, 1 - u))


def _periodic_remainder_odd(t, s, L):
    """``sum_{n != 0} sign(t + nL) |t + nL|^{-s}`` for ``|t| < L``."""
    u = np.asarray(t, dtype=float) / L
    return L ** (-s) * (zeta(s, 1 + u) - zeta(s, 1 - u))


# ---------------------------------------------------------------------------
# the generic paired integral


def _paired(f, x, spec, period, pair, kernel, inner, tail, chunk=64):
    """Integrate ``pair(f, x, t) * kernel(t)`` over ``t > 0``.

    ``inner(f, x, eps)`` estimates the ``[0, eps]`` piece, ``tail(f, x, R)``
    returns ``(correction, bound)`` beyond ``R`` (ignored for periodic ``f``).
    Refinement doubles the panels per decade until successive values agree.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    eps = spec.inner_cut
    R = 0.5 * period if period is not None else spec.outer_cut
    if R <= eps:
        raise ConfigurationError("outer cut must exceed inner cut")

    def outer(per_decade):
        t, wt = panel_rule(geometric_edges(eps, R, per_decade))
        kw = kernel(t) * wt
        out = np.empty(x.size)
        for i in range(0, x.size, chunk):
            xs = x[i:i + chunk, None]
            out[i:i + chunk] = pair(f, xs, t[None, :]) @ kw
        return out

    ppd = spec.panels_per_decade
    coarse = outer(ppd)
    for _ in range(spec.max_refinements + 1):
        ppd *= 2
        fine = outer(ppd)
        err = np.abs(fine - coarse)
        inner_val, inner_err = inner(f, x, eps)
        if period is None and spec.tail_correction:
            tail_val, tail_bound = tail(f, x, R)
        else:
            tail_val, tail_bound = np.zeros_like(x), np.zeros_like(x)
        value = fine + inner_val + tail_val
        total_err = err + inner_err
        scale = np.maximum(1.0, np.abs(value))
        if np.all(total_err <= spec.tol * scale):
            return QuadResult(value, total_err, tail_bound)
        coarse = fine
    worst = float(np.max(total_err / scale))
    raise QuadratureError("singular quadrature did not converge", achieved=worst, value=value)


def _taylor_inner(pair, f, x, eps, lead, kernel_terms):
    """Integral over ``[0, eps]`` of ``pair(t) * sum_m k_m t^{-e_m}``.

    ``pair(t) / t^lead`` is fitted by ``c0 + c1 t^2 + c2 t^4`` through samples
    at ``eps``, ``eps/2`` and ``eps/4`` and integrated exactly.  The returned
    error is the size of the ``c2`` contribution, which bounds the truncation
    of the two-term expansion.
    """
    ts = eps * np.array([1.0, 0.5, 0.25])
    P = np.stack([pair(f, x, t) / t ** lead for t in ts])
    V = np.vander(ts ** 2, 3, increasing=True)
    c = np.linalg.solve(V, P.reshape(3, -1)).reshape(P.shape)
    value = np.zeros_like(P[0])
    last = np.zeros_like(P[0])
    for km, em in kernel_terms:
        for j in range(3):
            e = lead + 2 * j + 1 - em
            term = km * c[j] * eps ** e / e
            value = value + term
            if j == 2:
                last = last + np.abs(term)
    return value, last


def _decay_exponent(a, b, ratio=2.0):
    """Local algebraic decay rate from values at ``R`` and ``ratio*R``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.log(np.abs(a) / np.abs(b)) / np.log(ratio)
    bad = ~np.isfinite(m) | (np.sign(a) != np.sign(b)) | (m < 0.5)
    return np.where(bad, 1.0, m)


def _result(res: QuadResult, scalar):
    if scalar:
        return float(res.value[0])
    return res.value


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")


# ---------------------------------------------------------------------------
# operators


def lambda_alpha(f, x, alpha, spec=QuadratureSpec(), period=None, full=False):
    r"""Real-space :math:`\Lambda^\alpha f(x)` for a vectorised callable ``f``.

    ``f`` is either decaying (``period=None``; tail beyond ``outer_cut``
    corrected assuming algebraic decay) or ``period``-periodic, in which case
    the kernel is summed over the lattice exactly.
    """
    _check_alpha(alpha)
    s = 1.0 + alpha
    scalar = np.ndim(x) == 0

    def pair(f, xs, t):
        return 2.0 * f(xs) - f(xs + t) - f(xs - t)

    if period is None:
        def kernel(t):
            return t ** (-s)
        s0 = 0.0
    else:
        L = float(period)

        def kernel(t):
            return t ** (-s) + _periodic_remainder_even(t, s, L)
        s0 = float(_periodic_remainder_even(0.0, s, L))

    def inner(f, x, eps):
        # 2f(x) - f(x+t) - f(x-t) is even in t and O(t^2)
        return _taylor_inner(pair, f, x, eps, 2, [(1.0, s), (s0, 0.0)])

    def tail(f, x, R):
        # 2 f(x) R^-a / a  minus  int_R^inf (f(x+t) + f(x-t)) t^{-1-a}
        const = 2.0 * f(x) * R ** (-alpha) / alpha
        s1 = f(x + R) + f(x - R)
        s2 = f(x + 2 * R) + f(x - 2 * R)
        m = _decay_exponent(s1, s2)
        far = s1 * R ** (-alpha) / (m + alpha)
        return const - far, np.abs(far)

    res = _paired(f, x, spec, period, pair, kernel, inner, tail)
    k = k_alpha(alpha)
    res = QuadResult(k * res.value, abs(k) * res.error, abs(k) * res.tail_bound)
    return res if full else _result(res, scalar)


def lambda_alpha_H(f, x, alpha, spec=QuadratureSpec(), period=None, full=False):
    r"""Real-space :math:`\Lambda^\alpha H f(x)` through the signed kernel."""
    _check_alpha(alpha)
    s = 1.0 + alpha
    scalar = np.ndim(x) == 0

    def pair(f, xs, t):
        return f(xs + t) - f(xs - t)

    if period is None:
        def kernel(t):
            return t ** (-s)
        r1 = 0.0
    else:
        L = float(period)

        def kernel(t):
            return t ** (-s) + _periodic_remainder_odd(t, s, L)
        r1 = -2.0 * s * float(zeta(s + 1.0, 1.0)) * L ** (-s - 1.0)  # remainder ~ r1 t

    def inner(f, x, eps):
        # f(x+t) - f(x-t) is odd in t and O(t)
        return _taylor_inner(pair, f, x, eps, 1, [(1.0, s), (r1, -1.0)])

    def tail(f, x, R):
        d1 = f(x + R) - f(x - R)
        d2 = f(x + 2 * R) - f(x - 2 * R)
        m = _decay_exponent(d1, d2)
        far = d1 * R ** (-alpha) / (m + alpha)
        return far, np.abs(far)

    res = _paired(f, x, spec, period, pair, kernel, inner, tail)
    k = k_alpha_H(alpha)
    res = QuadResult(k * res.value, abs(k) * res.error, abs(k) * res.tail_bound)
    return res if full else _result(res, scalar)


def hilbert_pv(f, x, spec=QuadratureSpec(tol=1e-6), period=None, full=False):
    r"""Principal-value Hilbert transform by symmetric pairing around ``x``."""
    scalar = np.ndim(x) == 0

    def pair(f, xs, t):
        return f(xs - t) - f(xs + t)

    if period is None:
        def kernel(t):
            return 1.0 / t
        r1 = 0.0
    else:
        L = float(period)

        def kernel(t):
            return (np.pi / L) / np.tan(np.pi * t / L)
        r1 = -((np.pi / L) ** 2) / 3.0  # cot kernel = 1/t + r1 t + ...

    def inner(f, x, eps):
        # f(x-t) - f(x+t) is odd in t
        return _taylor_inner(pair, f, x, eps, 1, [(1.0, 1.0), (r1, -1.0)])

    def tail(f, x, R):
        d1 = pair(f, x, R)
        d2 = pair(f, x, 2 * R)
        m = _decay_exponent(d1, d2)
        far = d1 / m
        return far, np.abs(far)

    res = _paired(f, x, spec, period, pair, kernel, inner, tail)
    res = QuadResult(res.value / np.pi, res.error / np.pi, res.tail_bound / np.pi)
    if np.any(res.error > spec.tol * np.maximum(1.0, np.abs(res.value))):
        raise QuadratureError("PV integral above tolerance", float(np.max(res.error)))
    return res if full else _result(res, scalar)


# ---------------------------------------------------------------------------
# the quadratic (Dini-type) integral on a grid

# eighth-order central first-derivative stencil
_FD8 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])


def central_derivative(u: RealField) -> np.ndarray:
    """Eighth-order periodic finite-difference derivative (no FFT involved)."""
    v = u.values
    out = np.zeros_like(v)
    for off, c in zip(range(-4, 5), _FD8):
        if c:
            out += c * np.roll(v, -off)
    return out / u.grid.spacing


def _dini_kernel(grid: GridSpec):
    """Lattice sum of ``1/(x-y)^2`` at offsets ``m h``, ``m = 1..n-1``."""
    n, L = grid.n_points, grid.domain_length
    m = np.arange(1, n)
    return (np.pi / L) ** 2 / np.sin(np.pi * m / n) ** 2


def dini_integral(u: RealField, j: int) -> float:
    r""":math:`\frac1{2\pi}\int (u(x_j)-u(y))^2/(x_j-y)^2\,dy` for periodic ``u``.

    The integrand extended periodically is summed over all images, which
    turns the kernel into :math:`(\pi/L)^2\csc^2(\pi(x-y)/L)`; the resulting
    smooth periodic integrand is integrated by the trapezoidal rule with the
    removable singularity at ``y = x_j`` filled by ``u'(x_j)^2``.
    """
    if not isinstance(u, RealField):
        raise ConfigurationError("dini_integral expects a RealField")
    n = u.grid.n_points
    if not 0 <= j < n:
        raise ConfigurationError(f"grid index {j} outside [0, {n})")
    v = u.values
    diffs = v[j] - np.roll(v, -j)[1:]
    slope = central_derivative(u)[j]
    total = np.sum(diffs ** 2 * _dini_kernel(u.grid)) + slope ** 2
    return float(u.grid.spacing * total / (2 * np.pi))


def dini_all(u: RealField, chunk: int = 512) -> np.ndarray:
    """:func:`dini_integral` at every grid node, O(n^2) in blocks."""
    n = u.grid.n_points
    v = u.values
    K = np.concatenate([[0.0], _dini_kernel(u.grid)])
    slope = central_derivative(u)
    out = np.empty(n)
    m = np.arange(n)
    for i in range(0, n, chunk):
        j = np.arange(i, min(i + chunk, n))
        offs = (m[None, :] - j[:, None]) % n
        out[j] = np.sum((v[j, None] - v[None, :]) ** 2 * K[offs], axis=1)
    out += slope ** 2
    return u.grid.spacing * out / (2 * np.pi)
