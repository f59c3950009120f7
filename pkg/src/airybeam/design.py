"""Closed-form Airy beam design from link geometry.

The beam is constrained to pass a waypoint ``(z_b, x_s)`` just clear of the
obstacle edge and a target ``(z_r, x_c)`` on the receiver plane. Given the
curving coefficient ``B`` the focal distance and steering angle follow
linearly from these two conditions; ``B`` itself comes from maximizing the
on-trajectory magnitude at the receiver (quartic term dropped, leaving a
quadratic in ``B^3``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import AnalyticContext, magnitude_on_trajectory, trajectory_ula
from .errors import GeometryError, InfeasibleDesignError
from .numerics import AIRY_PEAK
from .phase import AiryParams
from .scenario import Scenario, simulation_grid

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Anchors:
    """Waypoint ``(z_b, x_s[, y_s])`` and target ``(z_r, x_c[, y_c])`` in meters.

    Coordinates are absolute; ``origin`` holds the transmit-array centre the
    closed forms are referred to.
    """

    z_b: float
    x_s: float
    z_r: float
    x_c: float
    y_s: float | None = None
    y_c: float | None = None
    margin: float | tuple[float, float] = 0.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not 0 < self.z_b < self.z_r:
            raise GeometryError("anchors need 0 < z_b < z_r")

    def along(self, axis: str) -> "Anchors":
        """One-dimensional anchors for ``axis`` (y values moved into the x slots)."""
        if axis == "x":
            return Anchors(self.z_b, self.x_s, self.z_r, self.x_c, margin=self.margin,
                           origin=self.origin)
        if self.y_s is None or self.y_c is None:
            raise GeometryError("anchors carry no y coordinates")
        return Anchors(self.z_b, self.y_s, self.z_r, self.y_c, margin=self.margin,
                       origin=(self.origin[1], self.origin[0]))

    def mirrored(self) -> "Anchors":
        neg = lambda v: None if v is None else -v
        return Anchors(self.z_b, -self.x_s, self.z_r, -self.x_c, neg(self.y_s), neg(self.y_c),
                       self.margin, (-self.origin[0], -self.origin[1]))

    def to_dict(self) -> dict:
        d = {"z_b": self.z_b, "x_s": self.x_s, "z_r": self.z_r, "x_c": self.x_c}
        if self.y_s is not None:
            d.update(y_s=self.y_s, y_c=self.y_c)
        d["margin"] = list(self.margin) if isinstance(self.margin, tuple) else self.margin
        return d


@dataclass(frozen=True)
class DesignSolution:
    """Solved phase parameters for one link.

    ``py`` is ``None`` for ULA designs. ``sigma`` holds the root sign chosen per
    Airy-designed dimension (0 for a focusing dimension). ``status`` is
    ``"ok"`` or ``"no-bend"`` (obstacle clear of the LoS axis; focusing used).
    """

    mode: str
    px: AiryParams
    py: AiryParams | None
    anchors: Anchors | None
    ctx: AnalyticContext
    sigma: tuple[int, int] = (0, 0)
    status: str = "ok"
    bend_axis: str | None = None

    def validity_interval(self) -> tuple[float, float] | None:
        if self.anchors is None:
            return None
        a = self.anchors
        return 0.05 * a.z_r, a.z_r + 0.5 * (a.z_r - a.z_b)

    def trajectory(self, z, lobe: int = 0, check: bool = True):
        """Absolute transverse position(s) of the lobe at depth ``z``."""
        valid = self.validity_interval() if check else None
        ox, oy = self.anchors.origin if self.anchors is not None else (0.0, 0.0)
        x = ox + trajectory_ula(z, self.px, self.ctx, lobe, valid, "x")
        if self.py is None:
            return x
        return x, oy + trajectory_ula(z, self.py, self.ctx, lobe, valid, "y")

    def residuals(self) -> dict:
        """Boundary-condition mismatch at waypoint and target."""
        a = self.anchors
        if a is None or self.status != "ok":
            return {}
        out = {}
        xb = self.trajectory(a.z_b, check=False)
        xr = self.trajectory(a.z_r, check=False)
        if self.py is None:
            xb, xr = (xb, None), (xr, None)
        if self.mode != "UPA-mode1" or self.bend_axis == "x":
            out["x_b"] = float(abs(xb[0] - a.x_s))
            out["x_r"] = float(abs(xr[0] - a.x_c))
        if self.py is not None and (self.mode == "UPA-mode2" or self.bend_axis == "y"):
            out["y_b"] = float(abs(xb[1] - a.y_s))
            out["y_r"] = float(abs(xr[1] - a.y_c))
        return out

    def to_dict(self) -> dict:
        py = self.py
        return {
            "mode": self.mode,
            "status": self.status,
            "Bx": self.px.B, "Fx": self.px.F, "thetax": self.px.theta,
            "By": None if py is None else py.B,
            "Fy": None if py is None else py.F,
            "thetay": None if py is None else py.theta,
            "sigma": list(self.sigma),
            "bend_axis": self.bend_axis,
            "anchors": None if self.anchors is None else self.anchors.to_dict(),
            "residuals": self.residuals(),
        }


# --------------------------------------------------------------------------
# anchors
# --------------------------------------------------------------------------

def default_margin(wavelength: float) -> float:
    return 5.0 * wavelength


def anchors_ula(s: Scenario, d_s: float | None = None) -> Anchors:
    """Waypoint ``d_s`` clear of the obstacle edge and the matching receiver target.

    For an obstacle occupying ``x <= x_b`` the waypoint is ``x_b + d_s`` and the
    target keeps the slope from the waypoint to the far receiver corner; an
    obstacle occupying ``x >= x_b`` mirrors this.
    """
    if s.kind != "ULA" or len(s.blockages) != 1:
        raise GeometryError("ULA anchors need a ULA scenario with exactly one obstacle")
    b = s.blockages[0]
    side = b.side
    if side == "slab":
        raise GeometryError("ULA anchors need a half-plane obstacle")
    d_s = default_margin(s.wavelength) if d_s is None else float(d_s)
    ox = s.tx.center[0]
    z_r = s.distance
    x_r = s.rx.center[0] - ox
    x_b = b.edge - ox
    half = 0.5 * (s.rx.aperture[0] - s.tx.aperture[0])
    if side == "below":
        x_s = x_b + d_s
        x_c = x_s + (x_r + half) / z_r * (z_r - b.z_b)
    else:
        x_s = x_b - d_s
        x_c = x_s + (x_r - half) / z_r * (z_r - b.z_b)
    grid = simulation_grid(s)
    lo, hi = grid.extent if s.kind == "ULA" else grid.x.extent
    if not lo < x_s + ox < hi:
        raise InfeasibleDesignError(f"waypoint x_s={x_s + ox:.4g} m lies outside the grid span")
    return Anchors(b.z_b, x_s + ox, z_r, x_c + ox, margin=d_s, origin=(ox, 0.0))


def _los_point(s: Scenario, z: float) -> tuple[float, float]:
    t = z / s.distance
    return ((1 - t) * s.tx.center[0] + t * s.rx.center[0],
            (1 - t) * s.tx.center[1] + t * s.rx.center[1])


def _nearest_boundary(p: float, rng: tuple[float, float]) -> tuple[float, int]:
    """Distance from ``p`` to the closer finite bound of ``rng`` and the exit direction."""
    best = (math.inf, 0)
    if math.isfinite(rng[1]):
        best = min(best, (rng[1] - p, +1))
    if math.isfinite(rng[0]):
        best = min(best, (p - rng[0], -1))
    return best


@dataclass(frozen=True)
class BendSelection:
    axis: str | None
    anchors: Anchors | None
    d_px: float = math.inf
    d_py: float = math.inf

    @property
    def needs_bend(self) -> bool:
        return self.axis is not None


def select_bending_dimension(s: Scenario, margins: float | tuple[float, float] | None = None
                             ) -> BendSelection:
    """Pick the transverse axis needing the smaller deviation to clear the obstacle.

    ``P`` is where the LoS axis meets the obstacle plane. The axis whose
    nearest obstacle boundary is closer to ``P`` bends (ties go to x); the
    other axis keeps its LoS coordinate. An obstacle not containing ``P``
    yields a selection with ``axis=None``.
    """
    if s.kind != "UPA" or len(s.blockages) != 1:
        raise GeometryError("bending selection needs a UPA scenario with exactly one obstacle")
    b = s.blockages[0]
    if margins is None:
        margins = default_margin(s.wavelength)
    dsx, dsy = (margins, margins) if np.isscalar(margins) else tuple(margins)
    xp, yp = _los_point(s, b.z_b)
    inside = b.x_range[0] <= xp <= b.x_range[1] and b.y_range[0] <= yp <= b.y_range[1]
    if not inside:
        return BendSelection(None, None)
    d_px, dir_x = _nearest_boundary(xp, b.x_range)
    d_py, dir_y = _nearest_boundary(yp, b.y_range)
    if not (math.isfinite(d_px) or math.isfinite(d_py)):
        raise GeometryError("obstacle has no finite boundary to bend around")
    z_r = s.distance
    ox, oy = s.tx.center[:2]
    xr, yr = s.rx.center[:2]
    hx = 0.5 * (s.rx.aperture[0] - s.tx.aperture[0])
    hy = 0.5 * (s.rx.aperture[1] - s.tx.aperture[1])
    if d_px <= d_py:
        x_s = xp + dir_x * (d_px + dsx)
        x_c = x_s + ((xr - ox) + dir_x * hx) / z_r * (z_r - b.z_b)
        a = Anchors(b.z_b, x_s, z_r, x_c, yp, yr, (dsx, dsy), (ox, oy))
        return BendSelection("x", a, d_px, d_py)
    y_s = yp + dir_y * (d_py + dsy)
    y_c = y_s + ((yr - oy) + dir_y * hy) / z_r * (z_r - b.z_b)
    a = Anchors(b.z_b, xp, z_r, xr, y_s, y_c, (dsx, dsy), (ox, oy))
    return BendSelection("y", a, d_px, d_py)


# --------------------------------------------------------------------------
# closed-form solve
# --------------------------------------------------------------------------

def _geometry(a: Anchors):
    """Local (origin-referred) anchor values and the derived slopes."""
    x_s = a.x_s - a.origin[0]
    x_c = a.x_c - a.origin[0]
    delta = x_c / a.z_r - x_s / a.z_b
    g = 1 / a.z_r - 1 / a.z_b
    return x_s, x_c, delta, g


def required_deviation(a: Anchors) -> float:
    """Waypoint offset from the straight line joining the origin to the target."""
    x_s, x_c, _, _ = _geometry(a)
    return x_s - x_c * a.z_b / a.z_r


def curving_roots(a: Anchors, ctx: AnalyticContext, axis: str = "x") -> tuple[float, float]:
    """The two real roots ``B(sigma=+1)``, ``B(sigma=-1)`` of the reduced magnitude condition."""
    lam = ctx.wavelength
    w0 = ctx.waist_of(axis)
    _, _, delta, g = _geometry(a)
    p = -3 * delta / (16 * lam * math.pi ** 2 * w0 ** 2)
    disc = (p ** 2 + 2 / ((2 * math.pi) ** 6 * w0 ** 6)
            + 3 * g ** 2 / (128 * lam ** 2 * math.pi ** 4 * w0 ** 2))
    r = math.sqrt(disc)
    return float(np.cbrt(p + r)), float(np.cbrt(p - r))


def stationary_curving_coefficients(a: Anchors, ctx: AnalyticContext,
                                    axis: str = "x") -> np.ndarray:
    """Real roots of the full sextic stationarity condition (``B^4`` term kept).

    Analysis aid: it locates the true maximizer of the receiver-plane
    magnitude that :func:`curving_roots` approximates.
    """
    lam = ctx.wavelength
    w0 = ctx.waist_of(axis)
    _, _, delta, g = _geometry(a)
    c6 = (2 * math.pi) ** 6 * w0 ** 2
    coeffs = [1.0, 0.0, 2 * AIRY_PEAK / (2 * math.pi * w0) ** 2,
              6 * (math.pi / lam) ** 2 * (g / 2) * (8 * lam * math.pi ** 2 * delta / g) / c6,
              0.0, 0.0,
              -2 / ((2 * math.pi) ** 6 * w0 ** 6) - 6 * (math.pi / lam) ** 2 * (g / 2) ** 2 / c6]
    r = np.roots(coeffs)
    r = r[np.abs(r.imag) <= 1e-9 * np.abs(r)].real
    return np.sort(r[r != 0])


def params_for_B(B: float, a: Anchors, ctx: AnalyticContext, axis: str = "x") -> AiryParams:
    """Focal distance and steering angle that put the main lobe on both anchors for this ``B``."""
    if B == 0:
        raise InfeasibleDesignError("curving coefficient must be nonzero")
    lam = ctx.wavelength
    x_s, _, delta, g = _geometry(a)
    inv_F = 0.5 * (1 / a.z_r + 1 / a.z_b) + 8 * lam * math.pi ** 2 * delta / g * B ** 3
    S_I = ctx.S_I(axis)
    arg = (-AIRY_PEAK * lam * B - x_s / a.z_b
           - ((1 / a.z_b - inv_F) ** 2 - S_I ** 2) / (16 * lam * math.pi ** 2 * B ** 3))
    if not -1 <= arg <= 1 or not math.isfinite(arg):
        raise InfeasibleDesignError(f"steering angle needs sin(theta)={arg:.4g}")
    if abs(arg) == 1:
        raise InfeasibleDesignError("steering angle reaches +-pi/2")
    F = math.inf if inv_F == 0 else 1 / inv_F
    return AiryParams(B, F, math.asin(arg))


def solve_airy_ula(a: Anchors, ctx: AnalyticContext, axis: str = "x") -> tuple[AiryParams, int]:
    """Closed-form ``(B, F, theta)`` through both anchors, and the root sign used.

    The root whose sign matches the direction of the required deviation is
    kept. With zero deviation both are admissible and the one with the larger
    receiver-plane magnitude wins (exact ties go to positive ``B``).
    """
    if a.z_b == a.z_r:
        raise GeometryError("waypoint and target planes coincide")
    b_plus, b_minus = curving_roots(a, ctx, axis)
    dev = required_deviation(a)
    scale = max(abs(a.x_s - a.origin[0]), abs(a.x_c - a.origin[0]), ctx.wavelength)
    if abs(dev) > TIE_RTOL * scale:
        sigma = +1 if (b_plus > 0) == (dev > 0) else -1
    else:
        cands = []
        for sg, B in ((+1, b_plus), (-1, b_minus)):
            try:
                p = params_for_B(B, a, ctx, axis)
            except InfeasibleDesignError:
                continue
            cands.append((float(magnitude_on_trajectory(B, p.F, ctx, a.z_r, axis)), sg, B))
        if not cands:
            raise InfeasibleDesignError("no admissible curving coefficient")
        top = max(c[0] for c in cands)
        tied = [c for c in cands if c[0] >= top * (1 - 1e-9)]
        sigma = max(tied, key=lambda c: c[2])[1]
    B = b_plus if sigma == +1 else b_minus
    return params_for_B(B, a, ctx, axis), sigma


def log_magnitude_at_target(B: float, a: Anchors, ctx: AnalyticContext, axis: str = "x") -> float:
    """``ln`` of the main-lobe magnitude at ``z_r`` with ``F`` pinned by the anchors.

    Objective of the brute-force B search used to cross-check the closed form.
    Infeasible ``B`` (no real steering angle) scores ``-inf``.
    """
    try:
        p = params_for_B(B, a, ctx, axis)
    except InfeasibleDesignError:
        return -math.inf
    with np.errstate(divide="ignore"):
        return float(np.log(magnitude_on_trajectory(B, p.F, ctx, a.z_r, axis)))


def grid_search_B(a: Anchors, ctx: AnalyticContext, B_max: float = 20.0, n: int = 2000,
                  axis: str = "x") -> tuple[float, float]:
    """Argmax of :func:`log_magnitude_at_target` on ``n`` points of ``(0, B_max]``.

    The half-line is signed like the required deviation (positive for zero).
    Returns ``(B, step)``.
    """
    sign = -1.0 if required_deviation(a) < 0 else 1.0
    step = B_max / n
    grid = sign * step * np.arange(1, n + 1)
    vals = np.array([log_magnitude_at_target(B, a, ctx, axis) for B in grid])
    return float(grid[int(np.argmax(vals))]), step


# --------------------------------------------------------------------------
# scenario-level designers
# --------------------------------------------------------------------------

def focusing_params(s: Scenario, axis: str = "x") -> AiryParams:
    """Focus on the receiver centre: ``F = z_r`` and ``sin(theta) = -(r - t) / z_r``."""
    i = 0 if axis == "x" else 1
    off = s.rx.center[i] - s.tx.center[i]
    if abs(off) >= s.distance:
        raise InfeasibleDesignError("receiver offset exceeds the link distance")
    return AiryParams.focusing(s.distance, math.asin(-off / s.distance))


def design_ula(s: Scenario, d_s: float | None = None) -> DesignSolution:
    """Closed-form ULA design; an obstacle-free scenario falls back to focusing."""
    ctx = AnalyticContext.for_array(s.tx, s.wavelength)
    if not s.blockages:
        return DesignSolution("ULA", focusing_params(s), None, None, ctx, status="no-bend")
    a = anchors_ula(s, d_s)
    p, sg = solve_airy_ula(a, ctx)
    return DesignSolution("ULA", p, None, a, ctx, (sg, 0), bend_axis="x")


def _upa_fallback(s: Scenario, mode: str, ctx: AnalyticContext) -> DesignSolution:
    return DesignSolution(mode, focusing_params(s, "x"), focusing_params(s, "y"), None, ctx,
                          status="no-bend")


def design_upa_mode1(s: Scenario, margins=None) -> DesignSolution:
    """Airy profile on the bending axis only; the other axis focuses on the receiver."""
    ctx = AnalyticContext.for_array(s.tx, s.wavelength)
    sel = select_bending_dimension(s, margins)
    if not sel.needs_bend:
        return _upa_fallback(s, "UPA-mode1", ctx)
    a = sel.anchors
    p, sg = solve_airy_ula(a.along(sel.axis), ctx, sel.axis)
    if sel.axis == "x":
        return DesignSolution("UPA-mode1", p, focusing_params(s, "y"), a, ctx, (sg, 0),
                              bend_axis="x")
    return DesignSolution("UPA-mode1", focusing_params(s, "x"), p, a, ctx, (0, sg),
                          bend_axis="y")


def design_upa_mode2(s: Scenario, margins=None) -> DesignSolution:
    """Independent Airy profiles on both axes (the non-bending axis keeps LoS anchors)."""
    ctx = AnalyticContext.for_array(s.tx, s.wavelength)
    sel = select_bending_dimension(s, margins)
    if not sel.needs_bend:
        return _upa_fallback(s, "UPA-mode2", ctx)
    a = sel.anchors
    px, sx = solve_airy_ula(a.along("x"), ctx, "x")
    py, sy = solve_airy_ula(a.along("y"), ctx, "y")
    return DesignSolution("UPA-mode2", px, py, a, ctx, (sx, sy), bend_axis=sel.axis)


def design(s: Scenario, mode: str | None = None, margins=None) -> DesignSolution:
    """Dispatch on array kind; UPA defaults to mode 2."""
    if s.kind == "ULA":
        return design_ula(s, margins)
    if mode in (None, "mode2", "UPA-mode2", 2):
        return design_upa_mode2(s, margins)
    if mode in ("mode1", "UPA-mode1", 1):
        return design_upa_mode1(s, margins)
    raise GeometryError(f"unknown UPA mode {mode!r}")
