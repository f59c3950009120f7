"""Link geometry: antenna arrays, obstacles, LoS tunnel and blockage masks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, GeometryError
from .numerics import Grid1D, Grid2D, next_pow2
from .propagation import PropagationSettings

SPEED_OF_LIGHT = 299_792_458.0


def wavelength_from_frequency(f_hz: float) -> float:
    return SPEED_OF_LIGHT / f_hz


@dataclass(frozen=True)
class ArraySpec:
    """Uniform linear (``counts=N``) or planar (``counts=(Nx, Ny)``) array in a z-plane."""

    kind: str
    counts: int | tuple[int, int]
    pitch: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind not in ("ULA", "UPA"):
            raise ConfigurationError(f"unknown array kind {self.kind!r}")
        if kind == "ULA":
            counts = int(np.ravel(self.counts)[0])
            if counts < 1:
                raise ConfigurationError("array needs at least one element")
        else:
            c = tuple(int(v) for v in np.ravel(self.counts))
            if len(c) != 2 or min(c) < 1:
                raise ConfigurationError("UPA counts must be two positive integers")
            counts = c
        object.__setattr__(self, "counts", counts)
        if not self.pitch > 0:
            raise ConfigurationError("array pitch must be positive")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    @property
    def nx(self) -> int:
        return self.counts if self.kind == "ULA" else self.counts[0]

    @property
    def ny(self) -> int:
        return 1 if self.kind == "ULA" else self.counts[1]

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def aperture(self) -> tuple[float, float]:
        """Physical spans ``((Nx-1) d, (Ny-1) d)``."""
        return (self.nx - 1) * self.pitch, (self.ny - 1) * self.pitch

    def offsets(self, axis: str = "x") -> np.ndarray:
        n = self.nx if axis == "x" else self.ny
        return (np.arange(n) - (n - 1) / 2) * self.pitch


def element_positions(array: ArraySpec) -> np.ndarray:
    """Element coordinates, shape ``(N, 3)``.

    UPA elements are ordered row-major with y as the slow index, matching the
    ``(ny, nx)`` layout of 2D fields.
    """
    cx, cy, cz = array.center
    ox = array.offsets("x")
    if array.kind == "ULA":
        pts = np.zeros((array.nx, 3))
        pts[:, 0] = cx + ox
        pts[:, 1] = cy
    else:
        oy = array.offsets("y")
        yy, xx = np.meshgrid(cy + oy, cx + ox, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(xx.size)])
    pts[:, 2] = cz
    return pts


@dataclass(frozen=True)
class BlockageSpec:
    """Thin screen at ``z_b`` occupying ``x_range x y_range`` (bounds may be infinite).

    ``alpha`` is the amplitude transmitted through the screen.
    """

    z_b: float
    x_range: tuple[float, float]
    y_range: tuple[float, float] = (-math.inf, math.inf)
    alpha: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x_range", tuple(float(v) for v in self.x_range))
        object.__setattr__(self, "y_range", tuple(float(v) for v in self.y_range))
        if not 0.0 <= self.alpha < 1.0:
            raise GeometryError(f"attenuation must lie in [0, 1), got {self.alpha}")
        for lo, hi in (self.x_range, self.y_range):
            if not lo < hi:
                raise GeometryError("obstacle ranges must have lo < hi")

    @classmethod
    def half_plane(cls, z_b: float, edge: float, side: str = "below", alpha: float = 0.0):
        """ULA obstacle with edge ``x = edge``; ``side='below'`` occupies ``x <= edge``."""
        if side == "below":
            return cls(z_b, (-math.inf, edge), alpha=alpha)
        if side == "above":
            return cls(z_b, (edge, math.inf), alpha=alpha)
        raise GeometryError(f"side must be 'below' or 'above', got {side!r}")

    @classmethod
    def corner(cls, z_b: float, x_edge: float, y_edge: float, alpha: float = 0.0):
        """UPA obstacle occupying ``x <= x_edge`` and ``y <= y_edge``."""
        return cls(z_b, (-math.inf, x_edge), (-math.inf, y_edge), alpha)

    @property
    def side(self) -> str:
        lo, hi = self.x_range
        if math.isinf(lo) and not math.isinf(hi):
            return "below"
        if math.isinf(hi) and not math.isinf(lo):
            return "above"
        return "slab"

    @property
    def edge(self) -> float:
        """Finite x-edge of a half-plane obstacle."""
        side = self.side
        if side == "below":
            return self.x_range[1]
        if side == "above":
            return self.x_range[0]
        raise GeometryError("obstacle is not a half-plane in x")


@dataclass(frozen=True)
class GridSettings:
    """Transverse simulation window.

    ``pitch`` defaults to half a wavelength; ``span`` (per axis) defaults to
    twice the larger aperture plus twice the receiver offset plus a margin of
    ``0.5 D`` (ULA) or ``0.1 D`` (UPA).
    The simulated window is ``span * padding`` rounded up to a power of two.
    """

    pitch: float | None = None
    span: float | None = None


@dataclass(frozen=True)
class Scenario:
    tx: ArraySpec
    rx: ArraySpec
    distance: float
    wavelength: float
    blockages: tuple[BlockageSpec, ...] = ()
    grid: GridSettings = field(default_factory=GridSettings)
    propagation: PropagationSettings = field(
        default_factory=lambda: PropagationSettings(band_limit=True))

    def __post_init__(self):
        object.__setattr__(self, "blockages", tuple(self.blockages))
        if not self.distance > 0:
            raise GeometryError("link distance must be positive")
        if not self.wavelength > 0:
            raise GeometryError("wavelength must be positive")
        if self.tx.kind != self.rx.kind:
            raise ConfigurationError("tx and rx must both be ULA or both UPA")
        if not math.isclose(self.rx.center[2], self.distance, rel_tol=1e-12, abs_tol=1e-12):
            object.__setattr__(self, "rx", replace(self.rx, center=(
                self.rx.center[0], self.rx.center[1], self.distance)))
        for b in self.blockages:
            if not 0.0 < b.z_b < self.distance:
                raise GeometryError(f"obstacle plane z_b={b.z_b} outside (0, {self.distance})")

    @property
    def kind(self) -> str:
        return self.tx.kind

    def with_blockages(self, blockages: Sequence[BlockageSpec]) -> "Scenario":
        return replace(self, blockages=tuple(blockages))

    def unblocked(self) -> "Scenario":
        return replace(self, blockages=())

    @property
    def pitch(self) -> float:
        return self.grid.pitch if self.grid.pitch is not None else self.wavelength / 2

    def span(self) -> float:
        if self.grid.span is not None:
            return self.grid.span
        a = max(max(self.tx.aperture), max(self.rx.aperture))
        offset = max(abs(self.rx.center[0] - self.tx.center[0]),
                     abs(self.rx.center[1] - self.tx.center[1]))
        # a wide ULA window keeps the band limit from clipping element
        # patterns; planar grids stay narrow to bound memory
        extra = 0.5 if self.kind == "ULA" else 0.1
        return 2 * a + 2 * offset + extra * self.distance


def ula_scenario(n_t: int, n_r: int, pitch: float, distance: float, wavelength: float,
                 blockages: Sequence[BlockageSpec] = (), x_r: float = 0.0, **kw) -> Scenario:
    return Scenario(ArraySpec("ULA", n_t, pitch),
                    ArraySpec("ULA", n_r, pitch, (x_r, 0.0, distance)),
                    distance, wavelength, tuple(blockages), **kw)


def upa_scenario(n_t: tuple[int, int], n_r: tuple[int, int], pitch: float, distance: float,
                 wavelength: float, blockages: Sequence[BlockageSpec] = (),
                 rx_offset: tuple[float, float] = (0.0, 0.0), **kw) -> Scenario:
    return Scenario(ArraySpec("UPA", n_t, pitch),
                    ArraySpec("UPA", n_r, pitch, (rx_offset[0], rx_offset[1], distance)),
                    distance, wavelength, tuple(blockages), **kw)


def _aligned_origin(center: float, n: int, dx: float, anchor: float) -> float:
    # put `anchor` exactly on a node while keeping the window centred on `center`
    nominal = center - 0.5 * n * dx
    return anchor - round((anchor - nominal) / dx) * dx


def simulation_grid(s: Scenario) -> Grid1D | Grid2D:
    """Power-of-two grid covering ``span * padding``, with tx element 0 on a node."""
    dx = s.pitch
    if dx > s.wavelength / 2 * (1 + 1e-12):
        raise ConfigurationError("grid pitch must not exceed half a wavelength")
    n = next_pow2(s.span() * s.propagation.padding / dx)
    p0 = element_positions(s.tx)[0]
    cx = 0.5 * (s.tx.center[0] + s.rx.center[0])
    ox = _aligned_origin(cx, n, dx, p0[0])
    if s.kind == "ULA":
        return Grid1D(n, dx, ox)
    cy = 0.5 * (s.tx.center[1] + s.rx.center[1])
    oy = _aligned_origin(cy, n, dx, p0[1])
    return Grid2D(n, n, dx, dx, (ox, oy))


# --------------------------------------------------------------------------
# LoS tunnel and blockage ratio
# --------------------------------------------------------------------------

def tunnel_interval(s: Scenario, z: float, axis: str = "x") -> tuple[float, float]:
    """Cross-section of the convex hull of both apertures at depth ``z``."""
    i = 0 if axis == "x" else 1
    t = z / s.distance
    half_t = s.tx.aperture[i] / 2
    half_r = s.rx.aperture[i] / 2
    lo = (1 - t) * (s.tx.center[i] - half_t) + t * (s.rx.center[i] - half_r)
    hi = (1 - t) * (s.tx.center[i] + half_t) + t * (s.rx.center[i] + half_r)
    return lo, hi


def _overlap(a: tuple[float, float], b: tuple[float, float]) -> float:
    return max(0.0, min(a[1], b[1]) - max(a[0], b[0]))


def _fraction(interval: tuple[float, float], occupied: tuple[float, float]) -> float:
    span = interval[1] - interval[0]
    if span <= 0:
        return 1.0 if occupied[0] <= interval[0] <= occupied[1] else 0.0
    return min(1.0, _overlap(interval, occupied) / span)


def _single_blockage(s: Scenario, kind: str) -> BlockageSpec:
    if s.kind != kind:
        raise GeometryError(f"expected a {kind} scenario")
    if len(s.blockages) != 1:
        raise GeometryError("blockage ratio needs exactly one obstacle")
    return s.blockages[0]


def blockage_ratio_ula(s: Scenario) -> float:
    """Obstructed fraction of the LoS tunnel length at the obstacle plane."""
    b = _single_blockage(s, "ULA")
    return _fraction(tunnel_interval(s, b.z_b, "x"), b.x_range)


def blockage_ratio_upa(s: Scenario) -> float:
    """Obstructed fraction of the LoS tunnel cross-section area at the obstacle plane."""
    b = _single_blockage(s, "UPA")
    fx = _fraction(tunnel_interval(s, b.z_b, "x"), b.x_range)
    fy = _fraction(tunnel_interval(s, b.z_b, "y"), b.y_range)
    return fx * fy


def blockage_ratio(s: Scenario) -> float:
    return blockage_ratio_ula(s) if s.kind == "ULA" else blockage_ratio_upa(s)


def blockage_mask(s: Scenario, z: float, grid: Grid1D | Grid2D,
                  dz: float | None = None) -> np.ndarray:
    """Amplitude mask for the propagation step ``(z - dz, z]``.

    Screens whose plane lies inside the step contribute ``alpha`` on every
    cell whose centre is inside the obstacle (closed bounds); all other cells
    are 1.
    """
    dz = s.propagation.dz if dz is None else dz
    mask = np.ones(grid.shape)
    for b in s.blockages:
        if not (z - dz < b.z_b <= z):
            continue
        if grid.ndim == 1:
            x = grid.coords()
            inside = (x >= b.x_range[0]) & (x <= b.x_range[1])
            if b.y_range[0] > 0 or b.y_range[1] < 0:
                inside[:] = False
        else:
            x, y = grid.coords()
            ix = (x >= b.x_range[0]) & (x <= b.x_range[1])
            iy = (y >= b.y_range[0]) & (y <= b.y_range[1])
            inside = iy[:, None] & ix[None, :]
        mask[inside] = np.minimum(mask[inside], b.alpha)
    return mask
