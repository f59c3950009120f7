"""Angular-spectrum propagation of sampled scalar fields, with thin blocking screens."""

from __future__ import annotations

import functools
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import scipy.fft

from .errors import AliasingWarning, ConfigurationError, DomainError
from .numerics import ComplexField, Grid1D, Grid2D

if TYPE_CHECKING:
    from .scenario import Scenario

# fraction of the band treated as "outer" by the aliasing guard, and the
# power fraction there that triggers a warning
_GUARD_BAND = 0.10
_GUARD_POWER = 0.01


@dataclass(frozen=True)
class PropagationSettings:
    """Stepping and spectral options.

    ``band_limit`` additionally drops spatial frequencies whose rays would
    travel more than half the periodic window over the propagated distance
    (the usual band-limited angular spectrum rule); it suppresses wraparound
    of wide-angle energy but breaks exact step composition, so it is off
    unless requested.
    """

    dz: float = 5e-3
    padding: int = 2
    evanescent: str = "zero"
    band_limit: bool = False

    def __post_init__(self):
        if not self.dz > 0:
            raise ConfigurationError("propagation step must be positive")
        if int(self.padding) < 1:
            raise ConfigurationError("padding factor must be >= 1")
        if self.evanescent not in ("zero", "decay"):
            raise ConfigurationError(f"unknown evanescent policy {self.evanescent!r}")


def transfer_function(fx, fy, dz: float, wavelength: float, evanescent: str = "zero"):
    """Free-space transfer function ``H(fx, fy)`` for a step ``dz``."""
    fx = np.asarray(fx, dtype=float)
    fy = np.asarray(fy, dtype=float)
    arg = 1.0 - wavelength ** 2 * (fx ** 2 + fy ** 2)
    prop = arg >= 0
    root = np.sqrt(np.abs(arg))
    phase = 2 * np.pi * dz / wavelength * root
    h = np.where(prop, np.exp(1j * np.where(prop, phase, 0.0)), 0.0 + 0.0j)
    if evanescent == "decay":
        h = np.where(prop, h, np.exp(-np.where(prop, 0.0, phase)))
    return h[()] if h.ndim == 0 else h


def _freq_grid(grid):
    if grid.ndim == 1:
        return grid.freqs(), np.zeros(1)
    fx, fy = grid.freqs()
    return fx[None, :], fy[:, None]


def _band_limit(grid, wavelength: float, distance: float) -> np.ndarray:
    # f_lim = 1 / (lambda * sqrt((2 z / L)^2 + 1)) per axis, L = window length
    fx, fy = _freq_grid(grid)
    keep = np.ones(np.broadcast_shapes(np.shape(fx), np.shape(fy)), dtype=bool)
    spans = [(fx, grid.n * grid.dx)] if grid.ndim == 1 else [
        (fx, grid.nx * grid.dx), (fy, grid.ny * grid.dy)]
    for f, L in spans:
        flim = 1.0 / (wavelength * math.sqrt((2 * abs(distance) / L) ** 2 + 1))
        keep = keep & (np.abs(f) <= flim)
    return keep


@functools.lru_cache(maxsize=6)
def _transfer_on_grid(grid, dz: float, wavelength: float, evanescent: str,
                      limit_distance: float | None) -> np.ndarray:
    fx, fy = _freq_grid(grid)
    h = transfer_function(fx, fy, dz, wavelength, evanescent)
    h = np.broadcast_to(h, grid.shape).copy()
    if limit_distance is not None:
        h[~_band_limit(grid, wavelength, limit_distance)] = 0
    h.setflags(write=False)
    return h


def _axes(grid) -> tuple[int, ...]:
    return (-1,) if grid.ndim == 1 else (-2, -1)


def _aliasing_fraction(spec: np.ndarray, grid) -> float:
    fx, fy = _freq_grid(grid)
    if grid.ndim == 1:
        outer = np.abs(fx) > (1 - _GUARD_BAND) * 0.5 / grid.dx
    else:
        outer = (np.abs(fx) > (1 - _GUARD_BAND) * 0.5 / grid.dx) | (
            np.abs(fy) > (1 - _GUARD_BAND) * 0.5 / grid.dy)
        outer = np.broadcast_to(outer, grid.shape)
    p = np.abs(spec) ** 2
    total = p.sum()
    return float(p[..., outer].sum() / total) if total > 0 else 0.0


def _propagate_values(values: np.ndarray, grid, dz: float, wavelength: float,
                      settings: PropagationSettings, limit_distance: float | None,
                      check: bool = True) -> np.ndarray:
    axes = _axes(grid)
    spec = scipy.fft.fftn(values, axes=axes, workers=-1)
    if check:
        frac = _aliasing_fraction(spec, grid)
        if frac > _GUARD_POWER:
            warnings.warn(f"{100 * frac:.1f}% of field power lies in the outer "
                          f"{100 * _GUARD_BAND:.0f}% of the sampled band", AliasingWarning,
                          stacklevel=3)
    spec *= _transfer_on_grid(grid, float(dz), float(wavelength), settings.evanescent,
                              None if limit_distance is None else float(limit_distance))
    return scipy.fft.ifftn(spec, axes=axes, workers=-1)


def propagate_free(field: ComplexField, dz: float,
                   settings: PropagationSettings | None = None,
                   limit_distance: float | None = None) -> ComplexField:
    """Propagate ``field`` by ``dz`` through free space (circular convolution).

    With ``settings.band_limit`` the band-limit rule uses ``limit_distance``
    (default ``dz``).
    """
    settings = settings or PropagationSettings()
    if settings.band_limit:
        limit_distance = dz if limit_distance is None else limit_distance
    else:
        limit_distance = None
    vals = _propagate_values(field.values, field.grid, dz, field.wavelength, settings,
                             limit_distance)
    return field.replace(values=vals, z=field.z + dz)


def band_limited_power(field: ComplexField) -> float:
    """Power carried by propagating spatial frequencies only."""
    spec = scipy.fft.fftn(field.values, axes=_axes(field.grid), norm="ortho")
    fx, fy = _freq_grid(field.grid)
    prop = np.broadcast_to(field.wavelength ** 2 * (fx ** 2 + fy ** 2) <= 1, field.grid.shape)
    return float(np.sum(np.abs(spec[..., prop]) ** 2))


def propagate_blocked(field: ComplexField, z_end: float, s: "Scenario",
                      keep_steps: bool = False) -> list[ComplexField]:
    """Step from ``field.z`` to ``z_end`` applying blockage masks after each step.

    The interval is split into ``round((z_end - z0) / dz)`` equal steps; a
    screen at ``z_b`` acts once, at the end of the step containing it.
    Without ``keep_steps`` unmasked stretches are merged into single
    propagations (transfer functions compose exactly) and only the final field
    is returned.
    """
    from .scenario import blockage_mask

    settings = s.propagation
    if field.grid.ndim != (1 if s.kind == "ULA" else 2):
        raise ConfigurationError("field grid dimensionality does not match scenario arrays")
    if not math.isclose(field.wavelength, s.wavelength, rel_tol=1e-12):
        raise ConfigurationError("field wavelength differs from scenario wavelength")
    pitch = field.grid.dx
    if pitch > s.wavelength / 2 * (1 + 1e-12):
        raise ConfigurationError("grid pitch exceeds half a wavelength")
    z0 = field.z
    length = z_end - z0
    if not length > 0:
        raise ConfigurationError("z_end must exceed the field position")
    n_steps = max(1, int(round(length / settings.dz)))
    step = length / n_steps
    limit = length if settings.band_limit else None

    vals = field.values
    out: list[ComplexField] = []
    pending = 0.0
    checked = False
    for i in range(1, n_steps + 1):
        zi = z0 + i * step if i < n_steps else z_end
        mask = blockage_mask(s, zi, field.grid, step)
        masked = bool(np.any(mask != 1))
        pending += step
        if keep_steps or masked or i == n_steps:
            vals = _propagate_values(vals, field.grid, pending, s.wavelength, settings, limit,
                                     check=not checked)
            checked = True
            pending = 0.0
            if masked:
                vals = vals * mask
            if keep_steps:
                out.append(field.replace(values=vals, z=zi))
    if not keep_steps:
        out.append(field.replace(values=vals, z=z_end))
    return out


def inject_weights(grid, positions: np.ndarray, weights: np.ndarray, z: float,
                   wavelength: float) -> ComplexField:
    """Place element weights on the nearest grid cells (accumulating collisions)."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    weights = np.asarray(weights, dtype=np.complex128)
    vals = np.zeros(weights.shape[:-1] + grid.shape, dtype=np.complex128)
    if grid.ndim == 1:
        idx = np.rint((positions[:, 0] - grid.origin) / grid.dx).astype(int)
        if np.any((idx < 0) | (idx >= grid.n)):
            raise DomainError("array element outside the simulation grid")
        np.add.at(vals, (..., idx), weights)
    else:
        ix = np.rint((positions[:, 0] - grid.origin[0]) / grid.dx).astype(int)
        iy = np.rint((positions[:, 1] - grid.origin[1]) / grid.dy).astype(int)
        if np.any((ix < 0) | (ix >= grid.nx) | (iy < 0) | (iy >= grid.ny)):
            raise DomainError("array element outside the simulation grid")
        np.add.at(vals, (..., iy, ix), weights)
    return ComplexField(grid, z, vals, wavelength)


def _interp_index(coord: np.ndarray, g: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    t = (coord - g.origin) / g.dx
    tol = 1e-9
    if np.any(t < -tol) or np.any(t > g.n - 1 + tol):
        raise DomainError("sample point outside the grid span")
    t = np.clip(t, 0, g.n - 1)
    i0 = np.minimum(np.floor(t).astype(int), g.n - 2)
    return i0, t - i0


def field_at_points(field: ComplexField, points) -> np.ndarray:
    """Linear (1D) or bilinear (2D) interpolation of the complex samples.

    ``points`` holds x coordinates (1D) or ``(x, y)`` rows (2D).
    """
    v = field.values
    if field.grid.ndim == 1:
        x = np.atleast_1d(np.asarray(points, dtype=float))
        if x.ndim == 2:
            x = x[:, 0]
        i0, w = _interp_index(x, field.grid)
        return v[..., i0] * (1 - w) + v[..., i0 + 1] * w
    p = np.atleast_2d(np.asarray(points, dtype=float))
    g = field.grid
    ix, wx = _interp_index(p[:, 0], g.x)
    iy, wy = _interp_index(p[:, 1], g.y)
    return (v[..., iy, ix] * (1 - wx) * (1 - wy) + v[..., iy, ix + 1] * wx * (1 - wy)
            + v[..., iy + 1, ix] * (1 - wx) * wy + v[..., iy + 1, ix + 1] * wx * wy)


# --------------------------------------------------------------------------
# Binary field dumps: one JSON header line, then little-endian float64 (re, im)
# pairs in row-major order.
# --------------------------------------------------------------------------

def _header_bytes(meta: dict) -> bytes:
    return (json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def write_array_dump(path, values: np.ndarray, meta: dict) -> None:
    values = np.ascontiguousarray(values, dtype="<c16")
    meta = dict(meta, shape=list(values.shape))
    with open(path, "wb") as fh:
        fh.write(_header_bytes(meta))
        fh.write(values.tobytes(order="C"))


def read_array_dump(path) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        meta = json.loads(fh.readline().decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<c16")
    return data.reshape(meta["shape"]).astype(np.complex128), meta


def field_dump_bytes(field: ComplexField) -> bytes:
    g = field.grid
    if g.ndim == 1:
        meta = {"shape": [g.n], "pitch": [g.dx], "origin": [g.origin]}
    else:
        meta = {"shape": [g.ny, g.nx], "pitch": [g.dx, g.dy], "origin": list(g.origin)}
    meta.update(z=float(field.z), wavelength=float(field.wavelength))
    body = np.ascontiguousarray(field.values, dtype="<c16").tobytes(order="C")
    return _header_bytes(meta) + body


def write_field_dump(path, field: ComplexField) -> None:
    if field.values.shape != field.grid.shape:
        raise ConfigurationError("only single (unbatched) fields can be dumped")
    Path(path).write_bytes(field_dump_bytes(field))


def read_field_dump(path) -> ComplexField:
    values, meta = read_array_dump(path)
    shape = meta["shape"]
    if len(shape) == 1:
        grid = Grid1D(shape[0], meta["pitch"][0], meta["origin"][0])
    else:
        grid = Grid2D(shape[1], shape[0], meta["pitch"][0], meta["pitch"][1],
                      tuple(meta["origin"]))
    return ComplexField(grid, meta["z"], values, meta["wavelength"])
