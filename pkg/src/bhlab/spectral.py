r"""Periodic grids, discrete Fourier transforms and Fourier multipliers.

The whole line is replaced by a torus of length :math:`L` sampled at
:math:`x_j = -L/2 + j h`, :math:`h = L/n`.  Coefficients are the numpy FFT of
the samples divided by ``n`` (forward transform carries the :math:`1/n`), so
that

.. math::

    f(x_j) = \sum_k c_k \, e^{i \kappa_k (x_j - x_0)}, \qquad
    \kappa_k = 2\pi k / L .

Phases are measured from the first node :math:`x_0 = -L/2`; multipliers do
not care, and :func:`interpolate` accounts for the offset.

Multipliers with an odd symbol (``H``, :math:`\partial_x`,
:math:`\Lambda^\alpha H`) annihilate the Nyquist mode, which keeps their
output real.  ``sign(0) = 0`` everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, PreconditionError

__all__ = [
    "GridSpec",
    "RealField",
    "Spectrum",
    "to_spectrum",
    "from_spectrum",
    "hilbert",
    "frac_laplacian",
    "lambda_alpha_H_spectral",
    "derivative",
    "dealias",
    "dealias_cutoff",
    "interpolate",
    "apply_symbol",
    "l2_norm",
    "sobolev_seminorm_sq",
    "shift",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid of ``n_points`` nodes on ``[-L/2, L/2)``."""

    n_points: int
    domain_length: float

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise ConfigurationError(f"n_points must be an integer, got {n!r}")
        if n < 16 or n & (n - 1):
            raise ConfigurationError(f"n_points must be a power of two >= 16, got {n}")
        L = float(self.domain_length)
        if not np.isfinite(L) or L <= 0:
            raise ConfigurationError(f"domain_length must be positive, got {self.domain_length}")
        object.__setattr__(self, "n_points", int(n))
        object.__setattr__(self, "domain_length", L)

    @property
    def spacing(self) -> float:
        return self.domain_length / self.n_points

    @property
    def x0(self) -> float:
        return -0.5 * self.domain_length

    @property
    def nodes(self) -> np.ndarray:
        return self.x0 + self.spacing * np.arange(self.n_points)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers in numpy FFT order."""
        return np.fft.fftfreq(self.n_points, 1.0 / self.n_points).astype(int)

    @property
    def rwavenumbers(self) -> np.ndarray:
        """Non-negative integer wavenumbers of the real FFT."""
        return np.arange(self.n_points // 2 + 1)

    def kappa(self, k):
        """Physical wavenumber ``2 pi k / L``."""
        return 2.0 * np.pi * np.asarray(k, dtype=float) / self.domain_length


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RealField:
    """Samples of a real function on a :class:`GridSpec`."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] != self.grid.n_points:
            raise ConfigurationError(
                f"field has shape {v.shape}, grid expects ({self.grid.n_points},)"
            )
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("field values must be finite")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "RealField":
        return cls(grid, func(grid.nodes))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "RealField":
        return cls(grid, np.zeros(grid.n_points))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def __add__(self, other):
        return RealField(self.grid, self.values + _vals(other, self.grid))

    def __sub__(self, other):
        return RealField(self.grid, self.values - _vals(other, self.grid))

    def __mul__(self, c):
        return RealField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return RealField(self.grid, -self.values)


def _vals(other, grid):
    if isinstance(other, RealField):
        if other.grid != grid:
            raise ConfigurationError("fields live on different grids")
        return other.values
    return other


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier coefficients in numpy FFT order, normalised by ``1/n``."""

    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.grid.n_points,):
            raise ConfigurationError(
                f"spectrum has shape {c.shape}, grid expects ({self.grid.n_points},)"
            )
        object.__setattr__(self, "coeffs", _readonly(c))

    @property
    def k(self) -> np.ndarray:
        return self.grid.wavenumbers

    def is_hermitian(self, tol=1e-12) -> bool:
        c = self.coeffs
        mirrored = np.conj(c[(-np.arange(c.size)) % c.size])
        return bool(np.max(np.abs(c - mirrored)) <= tol * max(1.0, np.max(np.abs(c))))


def _check(f: RealField):
    if not isinstance(f, RealField):
        raise ConfigurationError(f"expected a RealField, got {type(f).__name__}")


def to_spectrum(f: RealField) -> Spectrum:
    _check(f)
    return Spectrum(f.grid, np.fft.fft(f.values) / f.grid.n_points)


def from_spectrum(s: Spectrum) -> RealField:
    vals = np.fft.ifft(s.coeffs * s.grid.n_points)
    return RealField(s.grid, vals.real)


# Multipliers operate on the real FFT for speed.  ``symbol`` receives the
# physical wavenumbers kappa >= 0 of the rfft bins.


def apply_symbol(values: np.ndarray, L: float, symbol, odd: bool = False) -> np.ndarray:
    """Apply a Fourier multiplier to real samples of a periodic function."""
    n = values.shape[-1]
    kap = 2.0 * np.pi * np.arange(n // 2 + 1) / L
    m = np.asarray(symbol(kap), dtype=complex)
    if odd:
        m = m.copy()
        m[-1] = 0.0
    return np.fft.irfft(np.fft.rfft(values) * m, n)


def _fractional_symbol(s):
    def symbol(kap):
        out = np.zeros_like(kap)
        nz = kap > 0
        out[nz] = kap[nz] ** s
        return out

    return symbol


def hilbert(f: RealField) -> RealField:
    """Hilbert transform, symbol ``-i sign(k)``."""
    _check(f)
    vals = apply_symbol(f.values, f.grid.domain_length, lambda k: -1j * np.sign(k), odd=True)
    return RealField(f.grid, vals)


def _require_mean_free(f: RealField, rtol=1e-10):
    scale = max(np.max(np.abs(f.values)), np.finfo(float).tiny)
    if abs(f.mean()) > rtol * scale:
        raise PreconditionError(
            f"negative powers need mean-free input; |mean| = {abs(f.mean()):.3e}"
        )


def frac_laplacian(f: RealField, s: float) -> RealField:
    """``Lambda^s`` with symbol ``|kappa|^s``; the zero mode is mapped to 0."""
    _check(f)
    if s < 0:
        _require_mean_free(f)
    vals = apply_symbol(f.values, f.grid.domain_length, _fractional_symbol(s))
    return RealField(f.grid, vals)


def lambda_alpha_H_spectral(f: RealField, alpha: float) -> RealField:
    """``Lambda^alpha H`` with symbol ``-i sign(kappa) |kappa|^alpha``."""
    _check(f)
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")
    base = _fractional_symbol(alpha)
    vals = apply_symbol(
        f.values, f.grid.domain_length, lambda k: -1j * np.sign(k) * base(k), odd=True
    )
    return RealField(f.grid, vals)


def derivative(f: RealField, order: int = 1) -> RealField:
    _check(f)
    vals = apply_symbol(
        f.values, f.grid.domain_length, lambda k: (1j * k) ** order, odd=order % 2 == 1
    )
    return RealField(f.grid, vals)


def dealias_cutoff(n_points: int) -> int:
    """Largest retained |k| under the 2/3 rule."""
    return n_points // 3


def dealias(s: Spectrum) -> Spectrum:
    """Zero every coefficient with ``|k| > floor(n/3)``."""
    c = np.where(np.abs(s.k) > dealias_cutoff(s.grid.n_points), 0.0, s.coeffs)
    return Spectrum(s.grid, c)


def shift(f: RealField, dx: float) -> RealField:
    """Spectral translate: returns ``g`` with ``g(x) = f(x + dx)``."""
    vals = apply_symbol(f.values, f.grid.domain_length, lambda k: np.exp(1j * k * dx))
    # the Nyquist mode of a real shift is not representable; keep its cosine part
    return RealField(f.grid, vals)


def interpolate(f, x, chunk: int = 256) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``f`` at arbitrary points.

    ``f`` is a :class:`RealField` or a ``(grid, rfft_coefficients)`` pair
    (coefficients already divided by ``n``).  Exact for band-limited fields.
    """
    if isinstance(f, RealField):
        grid = f.grid
        c = np.fft.rfft(f.values) / grid.n_points
    else:
        grid, c = f
    n = grid.n_points
    x = np.asarray(x, dtype=float)
    flat = x.ravel() - grid.x0
    kap = grid.kappa(np.arange(n // 2 + 1))
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    cw = c * w
    cw[-1] = c[-1].real  # Nyquist enters as a cosine only
    out = np.empty(flat.size)
    for i in range(0, flat.size, chunk):
        ph = np.exp(1j * np.outer(flat[i:i + chunk], kap))
        out[i:i + chunk] = (ph @ cw).real
    return out.reshape(x.shape)


def l2_norm(f: RealField) -> float:
    return float(np.sqrt(f.grid.spacing * np.sum(f.values ** 2)))


def sobolev_seminorm_sq(f: RealField, s: float) -> float:
    """``||Lambda^s f||_2^2`` by Parseval on the torus."""
    n = f.grid.n_points
    c = np.fft.rfft(f.values) / n
    kap = f.grid.kappa(np.arange(n // 2 + 1))
    wts = np.full(c.size, 2.0)
    wts[0] = 0.0  # the zero mode carries no weight for s != 0
    wts[-1] = 1.0
    pw = np.zeros_like(kap)
    pw[1:] = kap[1:] ** (2 * s)
    return float(f.grid.domain_length * np.sum(wts * pw * np.abs(c) ** 2))
