"""Closed-form Fresnel fields of Gaussian-windowed Airy beams, their trajectories
and on-trajectory magnitudes, plus slow quadrature references."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DegenerateParameterError, DomainError, OracleError
from .numerics import AIRY_PEAK, airy_ai, airy_ai_abs_peak_constants
from .phase import AiryParams, airy_phase_1d

C_AI = float(abs(airy_ai(AIRY_PEAK)))


@dataclass(frozen=True)
class AnalyticContext:
    """Wavelength and Gaussian waist(s) of the analytic aperture model."""

    wavelength: float
    waist: float | tuple[float, float]

    def __post_init__(self):
        w = np.ravel(self.waist)
        if w.size not in (1, 2) or np.any(w <= 0):
            raise ValueError("waist must be one or two positive lengths")
        object.__setattr__(self, "waist", float(w[0]) if w.size == 1 else (float(w[0]), float(w[1])))

    @classmethod
    def for_array(cls, array, wavelength: float) -> "AnalyticContext":
        """Waist = half the physical aperture along each axis."""
        ax, ay = array.aperture
        if array.kind == "ULA":
            return cls(wavelength, ax / 2)
        return cls(wavelength, (ax / 2, ay / 2))

    def waist_of(self, axis: str = "x") -> float:
        if isinstance(self.waist, tuple):
            return self.waist[0 if axis == "x" else 1]
        return self.waist

    def along(self, axis: str) -> "AnalyticContext":
        return AnalyticContext(self.wavelength, self.waist_of(axis))

    def S_I(self, axis: str = "x") -> float:
        return self.wavelength / (math.pi * self.waist_of(axis) ** 2)

    def inv_F_tilde(self, p: AiryParams, axis: str = "x") -> complex:
        """``1/F~ = 1/F - j lambda / (pi w0^2)``."""
        return p.inv_F - 1j * self.S_I(axis)


@dataclass(frozen=True)
class FieldCoefficients:
    A: float
    C1: np.ndarray
    C2: np.ndarray


def field_coefficients(x, z, p: AiryParams, ctx: AnalyticContext,
                       axis: str = "x") -> FieldCoefficients:
    lam = ctx.wavelength
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    A = (2 * math.pi * p.B) ** 3
    C1 = -(2 * math.pi / lam) * (math.sin(p.theta) + x / z)
    C2 = (math.pi / lam) * (1 / z - ctx.inv_F_tilde(p, axis))
    return FieldCoefficients(A, C1, C2)


def airy_argument(x, z, p: AiryParams, ctx: AnalyticContext, axis: str = "x"):
    lam = ctx.wavelength
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    S = 1 / z - ctx.inv_F_tilde(p, axis)
    return (-math.sin(p.theta) / (lam * p.B) - x / (lam * z * p.B)
            - S ** 2 / (16 * lam ** 2 * math.pi ** 2 * p.B ** 4))


def _check_z(z):
    if np.any(np.asarray(z) <= 0):
        raise DomainError("axial position must be positive")


def kernel_1d(u, z, p: AiryParams, ctx: AnalyticContext, axis: str = "x"):
    """Value of ``int w(u0) e^{j phi(u0)} e^{j k (u-u0)^2 / 2z} du0``.

    For ``B != 0`` this is the Airy closed form; ``B = 0`` uses the Gaussian
    integral. ``1/|B|`` (not ``1/B``) keeps the result valid for ``B < 0``.
    """
    _check_z(z)
    lam = ctx.wavelength
    u = np.asarray(u, dtype=float)
    z = np.asarray(z, dtype=float)
    co = field_coefficients(u, z, p, ctx, axis)
    chirp = np.exp(1j * math.pi * u ** 2 / (lam * z))
    if p.B == 0:
        a = -1j * co.C2
        return chirp * np.sqrt(math.pi / a) * np.exp(-1j * co.C1 ** 2 / (4 * co.C2))
    xi = airy_argument(u, z, p, ctx, axis)
    phase = 2 * co.C2 ** 3 / (3 * co.A ** 2) - co.C1 * co.C2 / co.A
    return chirp * np.exp(1j * phase) * airy_ai(xi) / abs(p.B)


def closed_form_field_ula(x, z, p: AiryParams, ctx: AnalyticContext):
    """Fresnel field of a Gaussian-windowed Airy aperture in the x-z plane."""
    if p.B == 0:
        raise DegenerateParameterError("B = 0 has no Airy closed form; use kernel_1d")
    z = np.asarray(z, dtype=float)
    k = 2 * math.pi / ctx.wavelength
    return np.exp(1j * k * z) / (1j * ctx.wavelength * z) * kernel_1d(x, z, p, ctx, "x")


def closed_form_field_upa(x, y, z, px: AiryParams, py: AiryParams, ctx: AnalyticContext):
    """Separable planar field ``e^{jkz} Psi_x Psi_y / (j lambda z)``."""
    z = np.asarray(z, dtype=float)
    k = 2 * math.pi / ctx.wavelength
    return (np.exp(1j * k * z) / (1j * ctx.wavelength * z)
            * kernel_1d(x, z, px, ctx, "x") * kernel_1d(y, z, py, ctx, "y"))


# --------------------------------------------------------------------------
# trajectories and magnitudes
# --------------------------------------------------------------------------

def trajectory_ula(z, p: AiryParams, ctx: AnalyticContext, lobe: int = 0,
                   valid: tuple[float, float] | None = None, axis: str = "x"):
    """Transverse position of lobe ``lobe`` (0 main, 1-2 side lobes) at depth ``z``.

    ``B = 0`` gives the straight beam axis ``-z sin(theta)``. ``valid``
    optionally restricts ``z`` to ``[z_min, z_max]``.
    """
    z = np.asarray(z, dtype=float)
    _check_z(z)
    if valid is not None and (np.any(z < valid[0] * (1 - 1e-12))
                              or np.any(z > valid[1] * (1 + 1e-12))):
        raise DomainError(f"z outside trajectory validity interval {valid}")
    if p.B == 0:
        return -math.sin(p.theta) * z
    xi = airy_ai_abs_peak_constants()[lobe]
    lam = ctx.wavelength
    S_R = 1 / z - p.inv_F
    S_I = ctx.S_I(axis)
    return (-xi * lam * z * p.B - math.sin(p.theta) * z
            - (S_R ** 2 - S_I ** 2) / (16 * lam * math.pi ** 2 * p.B ** 3) * z)


def trajectory_upa(z, px: AiryParams, py: AiryParams, ctx: AnalyticContext, lobe: int = 0,
                   valid: tuple[float, float] | None = None):
    return (trajectory_ula(z, px, ctx, lobe, valid, "x"),
            trajectory_ula(z, py, ctx, lobe, valid, "y"))


def _K(B: float, F: float, ctx: AnalyticContext, z, axis: str = "x"):
    lam = ctx.wavelength
    inv_F = 0.0 if math.isinf(F) else 1.0 / F
    R = (math.pi / lam) * (1 / np.asarray(z, dtype=float) - inv_F)
    I = 1.0 / ctx.waist_of(axis) ** 2      # Im C2 = (pi/lambda) S_I
    K2 = -AIRY_PEAK * I / (2 * math.pi) ** 2
    K6 = (R ** 2 * I + I ** 3 / 3) / (2 * math.pi) ** 6
    return K2, K6


def magnitude_on_trajectory(B: float, F: float, ctx: AnalyticContext, z, axis: str = "x"):
    """Main-lobe field magnitude ``|C_Ai / (lambda z B)| exp(-(K2/B^2 + K6/B^6))``."""
    if B == 0:
        raise DegenerateParameterError("on-trajectory magnitude needs B != 0")
    z = np.asarray(z, dtype=float)
    K2, K6 = _K(B, F, ctx, z, axis)
    return np.abs(C_AI / (ctx.wavelength * z * B)) * np.exp(-(K2 / B ** 2 + K6 / B ** 6))


def magnitude_upa(px: AiryParams, py: AiryParams, ctx: AnalyticContext, z):
    z = np.asarray(z, dtype=float)
    mx = magnitude_on_trajectory(px.B, px.F, ctx, z, "x")
    my = magnitude_on_trajectory(py.B, py.F, ctx, z, "y")
    return mx * my * ctx.wavelength * z


# --------------------------------------------------------------------------
# quadrature references (slow; for verification)
# --------------------------------------------------------------------------

def _breakpoints(phase_fn, a: float, b: float, per_piece: float = 4 * math.pi,
                 samples: int = 20001) -> np.ndarray:
    t = np.linspace(a, b, samples)
    ph = phase_fn(t)
    var = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(ph)))])
    n = max(8, int(math.ceil(var[-1] / per_piece)))
    targets = np.linspace(0, var[-1], n + 1)
    pts = np.interp(targets, var, t)
    pts[0], pts[-1] = a, b
    return np.unique(pts)


def fresnel_integral_1d(u: float, z: float, p: AiryParams, waist: float, wavelength: float,
                        epsabs: float = 1e-8, truncation: float = 4.0) -> complex:
    """Adaptive quadrature of the windowed Fresnel integral over ``|u0| <= 4 w0``.

    The range is cut into pieces of about two phase cycles each, every piece
    integrated with :func:`scipy.integrate.quad`; the summed error estimate
    must stay below ``epsabs``.
    """
    k = 2 * math.pi / wavelength
    lim = truncation * waist

    def phase(t):
        return airy_phase_1d(t, p, wavelength) + k * (u - t) ** 2 / (2 * z)

    def f(t):
        return math.exp(-(t / waist) ** 2) * complex(math.cos(phase(t)), math.sin(phase(t)))

    pts = _breakpoints(phase, -lim, lim)
    total = 0j
    err = 0.0
    tol = epsabs / len(pts)
    for a, b in zip(pts[:-1], pts[1:]):
        val, e = integrate.quad(f, a, b, complex_func=True, epsabs=tol, epsrel=0, limit=200)
        total += val
        err += abs(e.real) + abs(e.imag)
    if not err <= epsabs:
        raise OracleError(f"quadrature error estimate {err:.2e} exceeds {epsabs:.0e}")
    return total


def fresnel_oracle(x: float, z: float, p: AiryParams, ctx: AnalyticContext,
                   epsabs: float = 1e-8) -> complex:
    """Direct quadrature of the Gaussian-windowed 1D Fresnel diffraction integral."""
    lam = ctx.wavelength
    k = 2 * math.pi / lam
    integral = fresnel_integral_1d(x, z, p, ctx.waist_of("x"), lam, epsabs)
    return complex(np.exp(1j * k * z) / (1j * lam * z) * integral)


def fresnel_oracle_2d(x: float, y: float, z: float, px: AiryParams, py: AiryParams,
                      ctx: AnalyticContext, epsabs: float = 1e-8) -> complex:
    """Tensor-product quadrature of the separable planar Fresnel integral."""
    lam = ctx.wavelength
    k = 2 * math.pi / lam
    ix = fresnel_integral_1d(x, z, px, ctx.waist_of("x"), lam, epsabs)
    iy = fresnel_integral_1d(y, z, py, ctx.waist_of("y"), lam, epsabs)
    return complex(np.exp(1j * k * z) / (1j * lam * z) * ix * iy)


def closed_form_gaussian(x, z, waist: float, wavelength: float):
    """Fresnel field (1D prefactor convention) of an unmodulated Gaussian aperture."""
    ctx = AnalyticContext(wavelength, waist)
    z = np.asarray(z, dtype=float)
    k = 2 * math.pi / wavelength
    psi = kernel_1d(x, z, AiryParams.steering(0.0), ctx)
    return np.exp(1j * k * z) / (1j * wavelength * z) * psi
