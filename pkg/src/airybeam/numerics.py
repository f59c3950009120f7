"""Uniform grids, unitary DFT helpers and the Airy function of complex argument."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, DomainError

__all__ = [
    "Grid1D", "Grid2D", "ComplexField", "dft_forward", "dft_inverse",
    "airy_ai", "airy_ai_prime", "airy_ai_abs_peak_constants", "airy_ai_abs_maxima",
    "AIRY_PEAK", "AIRY_LOBE1", "AIRY_LOBE2", "AIRY_DOMAIN_RADIUS", "next_pow2",
]

# Local maxima of |Ai(x)| on the negative real axis, frozen at 5/4 significant digits.
AIRY_PEAK = -1.0188
AIRY_LOBE1 = -3.248
AIRY_LOBE2 = -4.820

AIRY_DOMAIN_RADIUS = 40.0
# Maclaurin series inside these radii, asymptotic expansions outside. The
# smaller radius applies in the decaying sector |arg z| < pi/3, where series
# cancellation costs relative accuracy.
_SERIES_RADIUS = 8.0
_SERIES_RADIUS_DECAY = 6.0
_SERIES_TERMS = 30
_ASYMPTOTIC_TERMS = 24

_AI0 = 0.355028053887817239260   # 3^(-2/3) / Gamma(2/3)
_AIP0 = 0.258819403792806798405  # 3^(-1/3) / Gamma(1/3), equals -Ai'(0)


def _is_pow2(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    """Smallest power of two >= max(n, 2)."""
    n = max(int(np.ceil(n)), 2)
    return 1 << (n - 1).bit_length()


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D sampling ``x_i = origin + i * dx`` with power-of-two ``n``."""

    n: int
    dx: float
    origin: float = 0.0

    def __post_init__(self):
        if not _is_pow2(int(self.n)):
            raise ConfigurationError(f"grid length must be a power of two >= 2, got {self.n}")
        if not self.dx > 0:
            raise ConfigurationError(f"grid pitch must be positive, got {self.dx}")

    @property
    def shape(self) -> tuple[int]:
        return (self.n,)

    @property
    def size(self) -> int:
        return self.n

    @property
    def ndim(self) -> int:
        return 1

    def coords(self) -> np.ndarray:
        return self.origin + np.arange(self.n) * self.dx

    def freqs(self) -> np.ndarray:
        """Spatial frequencies ``k / (n dx)`` in FFT wraparound order."""
        return np.fft.fftfreq(self.n, self.dx)

    @property
    def extent(self) -> tuple[float, float]:
        return self.origin, self.origin + (self.n - 1) * self.dx

    @classmethod
    def centered(cls, n: int, dx: float, center: float = 0.0) -> "Grid1D":
        return cls(n, dx, center - 0.5 * (n - 1) * dx)


@dataclass(frozen=True)
class Grid2D:
    """Uniform 2D sampling; values are stored as ``(ny, nx)`` arrays (row = y)."""

    nx: int
    ny: int
    dx: float
    dy: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if not _is_pow2(int(n)):
                raise ConfigurationError(f"grid lengths must be powers of two >= 2, got {n}")
        if not (self.dx > 0 and self.dy > 0):
            raise ConfigurationError("grid pitches must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def ndim(self) -> int:
        return 2

    @property
    def x(self) -> Grid1D:
        return Grid1D(self.nx, self.dx, self.origin[0])

    @property
    def y(self) -> Grid1D:
        return Grid1D(self.ny, self.dy, self.origin[1])

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return self.x.coords(), self.y.coords()

    def freqs(self) -> tuple[np.ndarray, np.ndarray]:
        return self.x.freqs(), self.y.freqs()


Grid = Grid1D | Grid2D


@dataclass(frozen=True)
class ComplexField:
    """Complex scalar field sampled on ``grid`` at axial position ``z``.

    ``domain`` is ``"space"`` for samples and ``"frequency"`` for the output of
    :func:`dft_forward`. Leading axes beyond the grid shape are allowed and
    treated as a batch of independent fields.
    """

    grid: Grid
    z: float
    values: np.ndarray
    wavelength: float
    domain: str = field(default="space")

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128)
        if vals.shape[vals.ndim - self.grid.ndim:] != self.grid.shape:
            raise ConfigurationError(
                f"value shape {vals.shape} does not end with grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise DomainError("field contains non-finite samples")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def power(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))

    def replace(self, **changes) -> "ComplexField":
        kw = dict(grid=self.grid, z=self.z, values=self.values,
                  wavelength=self.wavelength, domain=self.domain)
        kw.update(changes)
        return ComplexField(**kw)


def _axes(grid: Grid) -> tuple[int, ...]:
    return (-1,) if grid.ndim == 1 else (-2, -1)


def dft_forward(field: ComplexField) -> ComplexField:
    """Unitary DFT over the grid axes (``norm="ortho"``), wraparound ordering."""
    if field.domain != "space":
        raise ConfigurationError("dft_forward expects a spatial-domain field")
    spec = np.fft.fftn(field.values, axes=_axes(field.grid), norm="ortho")
    return field.replace(values=spec, domain="frequency")


def dft_inverse(spectrum: ComplexField) -> ComplexField:
    if spectrum.domain != "frequency":
        raise ConfigurationError("dft_inverse expects a frequency-domain field")
    vals = np.fft.ifftn(spectrum.values, axes=_axes(spectrum.grid), norm="ortho")
    return spectrum.replace(values=vals, domain="space")


# --------------------------------------------------------------------------
# Airy function
# --------------------------------------------------------------------------

def _asymptotic_coefficients(n: int) -> tuple[np.ndarray, np.ndarray]:
    u = np.empty(n)
    u[0] = 1.0
    for k in range(1, n):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k)
    k = np.arange(n)
    v = -(6 * k + 1) / (6 * k - 1) * u
    return u, v


_U, _V = _asymptotic_coefficients(_ASYMPTOTIC_TERMS)


def _series(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z3 = z ** 3
    tf = np.ones_like(z)     # a_k z^{3k}
    tg = z.copy()            # b_k z^{3k+1}
    td = z * z / 2           # 3k a_k z^{3k-1}, starting at k = 1
    te = np.ones_like(z)     # (3k+1) b_k z^{3k}
    f, g, df, dg = tf.copy(), tg.copy(), td.copy(), te.copy()
    for k in range(_SERIES_TERMS):
        tf = tf * z3 / ((3 * k + 2) * (3 * k + 3))
        tg = tg * z3 / ((3 * k + 3) * (3 * k + 4))
        td = td * z3 / ((3 * k + 3) * (3 * k + 5))
        te = te * z3 / ((3 * k + 1) * (3 * k + 3))
        f += tf
        g += tg
        df += td
        dg += te
    return _AI0 * f - _AIP0 * g, _AI0 * df - _AIP0 * dg


def _asym_right(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # valid for |arg z| <= 2pi/3 (and beyond, away from the negative axis)
    zeta = (2.0 / 3.0) * z ** 1.5
    q = z ** 0.25
    sgn = (-1.0) ** np.arange(_ASYMPTOTIC_TERMS)
    inv = 1.0 / zeta
    pw = np.ones_like(zeta)
    su = np.zeros_like(zeta)
    sv = np.zeros_like(zeta)
    for k in range(_ASYMPTOTIC_TERMS):
        su = su + sgn[k] * _U[k] * pw
        sv = sv + sgn[k] * _V[k] * pw
        pw = pw * inv
    e = np.exp(-zeta) / (2.0 * np.sqrt(np.pi))
    return e * su / q, -e * q * sv


def _asym_left(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Ai(-w) for |arg w| < pi/3, w = -z
    w = -z
    zeta = (2.0 / 3.0) * w ** 1.5
    q = w ** 0.25
    inv2 = 1.0 / zeta ** 2
    ue = np.zeros_like(zeta)
    uo = np.zeros_like(zeta)
    ve = np.zeros_like(zeta)
    vo = np.zeros_like(zeta)
    pw = np.ones_like(zeta)
    for m in range(_ASYMPTOTIC_TERMS // 2):
        s = (-1.0) ** m
        ue = ue + s * _U[2 * m] * pw
        uo = uo + s * _U[2 * m + 1] * pw / zeta
        ve = ve + s * _V[2 * m] * pw
        vo = vo + s * _V[2 * m + 1] * pw / zeta
        pw = pw * inv2
    c = np.cos(zeta - np.pi / 4)
    s_ = np.sin(zeta - np.pi / 4)
    ai = (c * ue + s_ * uo) / (np.sqrt(np.pi) * q)
    # d/dz Ai(z) = -d/dw Ai(-w)
    aip = q / np.sqrt(np.pi) * (s_ * ve - c * vo)
    return ai, aip


def _airy_pair(z) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=np.complex128)
    flat = z.reshape(-1)
    r = np.abs(flat)
    if np.any(~np.isfinite(r)) or np.any(r > AIRY_DOMAIN_RADIUS):
        raise DomainError(f"Airy argument outside |z| <= {AIRY_DOMAIN_RADIUS}")
    ai = np.empty_like(flat)
    aip = np.empty_like(flat)
    decaying = np.abs(np.angle(flat)) < np.pi / 3
    inner = np.where(decaying, r <= _SERIES_RADIUS_DECAY, r <= _SERIES_RADIUS)
    left = ~inner & (np.abs(np.angle(flat)) > 2 * np.pi / 3)
    right = ~inner & ~left
    for mask, fn in ((inner, _series), (right, _asym_right), (left, _asym_left)):
        if np.any(mask):
            a, b = fn(flat[mask])
            ai[mask] = a
            aip[mask] = b
    return ai.reshape(z.shape), aip.reshape(z.shape)


def airy_ai(z):
    """Airy function ``Ai(z)`` for complex ``z`` with ``|z| <= 40``.

    Accepts scalars or arrays; always returns complex values. Maclaurin series
    are used for ``|z| <= 8`` and the standard asymptotic expansions outside
    (the oscillatory form within 60 degrees of the negative real axis).

    Raises
    ------
    DomainError
        If any argument lies outside the evaluation disc.
    """
    ai, _ = _airy_pair(z)
    return ai[()] if ai.ndim == 0 else ai


def airy_ai_prime(z):
    """Derivative ``Ai'(z)``; same domain and method as :func:`airy_ai`."""
    _, aip = _airy_pair(z)
    return aip[()] if aip.ndim == 0 else aip


def airy_ai_abs_peak_constants() -> tuple[float, float, float]:
    """``(xi_peak, xi_lobe1, xi_lobe2)``: main-lobe and first two side-lobe arguments."""
    return (AIRY_PEAK, AIRY_LOBE1, AIRY_LOBE2)


def airy_ai_abs_maxima(count: int = 3, lower: float = -15.0) -> list[float]:
    """Locate the first ``count`` local maxima of ``|Ai(x)|`` for ``x < 0``.

    Maxima of ``|Ai|`` on the real axis sit at the zeros of ``Ai'``; these are
    bracketed on a fine scan and refined with Brent's method.
    """
    xs = np.linspace(0.0, lower, 3001)
    d = airy_ai_prime(xs).real
    roots: list[float] = []
    for i in range(len(xs) - 1):
        if d[i] == 0.0 or d[i] * d[i + 1] < 0:
            a, b = xs[i + 1], xs[i]
            roots.append(optimize.brentq(lambda t: airy_ai_prime(t).real, a, b, xtol=1e-14))
            if len(roots) == count:
                break
    return roots


def as_points(points: Sequence) -> np.ndarray:
    return np.atleast_1d(np.asarray(points, dtype=float))
