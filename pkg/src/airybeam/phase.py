"""Aperture phase profiles (Airy, focusing, steering) and element weights."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .scenario import ArraySpec, element_positions


@dataclass(frozen=True)
class AiryParams:
    """Cubic-phase beam parameters for one transverse dimension.

    ``B`` is the curving coefficient (1/m), ``F`` the focal distance (m,
    ``math.inf`` for none) and ``theta`` the steering angle (rad). ``B = 0``
    reduces to a focusing beam, ``B = 0, F = inf`` to a steering beam.
    """

    B: float
    F: float
    theta: float

    def __post_init__(self):
        if self.F == 0 or math.isnan(self.F):
            raise ConfigurationError("focal distance must be nonzero")
        if not abs(self.theta) < math.pi / 2:
            raise ConfigurationError("steering angle must satisfy |theta| < pi/2")
        if not math.isfinite(self.B):
            raise ConfigurationError("curving coefficient must be finite")

    @property
    def inv_F(self) -> float:
        return 0.0 if math.isinf(self.F) else 1.0 / self.F

    @classmethod
    def focusing(cls, F: float, theta: float = 0.0) -> "AiryParams":
        return cls(0.0, F, theta)

    @classmethod
    def steering(cls, theta: float) -> "AiryParams":
        return cls(0.0, math.inf, theta)

    def mirrored(self) -> "AiryParams":
        return AiryParams(-self.B, self.F, -self.theta)


@dataclass(frozen=True)
class ApertureWindow:
    kind: str = "rect"
    waist: float | tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("rect", "gaussian"):
            raise ConfigurationError(f"unknown window {self.kind!r}")
        if self.kind == "gaussian":
            w = np.ravel(self.waist) if self.waist is not None else np.array([])
            if w.size == 0 or np.any(w <= 0):
                raise ConfigurationError("gaussian window needs a positive waist")

    def __call__(self, x: np.ndarray, y: np.ndarray | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "rect":
            return np.ones_like(x)
        w = np.ravel(self.waist)
        wx, wy = (w[0], w[0]) if w.size == 1 else (w[0], w[1])
        out = np.exp(-(x / wx) ** 2)
        if y is not None:
            out = out * np.exp(-(np.asarray(y, dtype=float) / wy) ** 2)
        return out


def airy_phase_1d(x0, p: AiryParams, wavelength: float):
    """Cubic + quadratic + linear aperture phase in radians (not wrapped)."""
    x0 = np.asarray(x0, dtype=float)
    cubic = (2 * np.pi * p.B) ** 3 * x0 ** 3 / 3
    quad = -np.pi * p.inv_F / wavelength * x0 ** 2
    lin = -2 * np.pi / wavelength * math.sin(p.theta) * x0
    return cubic + quad + lin


def focusing_phase(x0, F: float, theta: float, wavelength: float):
    return airy_phase_1d(x0, AiryParams.focusing(F, theta), wavelength)


def steering_phase(x0, theta: float, wavelength: float):
    return airy_phase_1d(x0, AiryParams.steering(theta), wavelength)


def upa_phase(x0, y0, px: AiryParams, py: AiryParams, wavelength: float):
    """Separable planar profile: x-profile of ``x0`` plus y-profile of ``y0``."""
    return airy_phase_1d(x0, px, wavelength) + airy_phase_1d(y0, py, wavelength)


PhaseFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def element_weights(array: ArraySpec, phase: PhaseFunction,
                    window: ApertureWindow = ApertureWindow()) -> np.ndarray:
    """``window(x_n) * exp(j phase(x_n))`` at element offsets from the array centre.

    Weights are returned unnormalised; callers scale them to unit power when
    comparing spectral efficiencies.
    """
    pos = element_positions(array)
    x = pos[:, 0] - array.center[0]
    y = pos[:, 1] - array.center[1]
    amp = window(x, y if array.kind == "UPA" else None)
    return amp * np.exp(1j * np.asarray(phase(x, y), dtype=float))


def airy_weights(array: ArraySpec, px: AiryParams, wavelength: float,
                 py: AiryParams | None = None,
                 window: ApertureWindow = ApertureWindow()) -> np.ndarray:
    if array.kind == "ULA":
        fn = lambda x, y: airy_phase_1d(x, px, wavelength)
    else:
        py = py if py is not None else AiryParams.steering(0.0)
        fn = lambda x, y: upa_phase(x, y, px, py, wavelength)
    return element_weights(array, fn, window)


def normalized(w: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(w)
    return w / n if n > 0 else w
