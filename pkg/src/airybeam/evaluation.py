"""Simulated MIMO channels, benchmark beamformers and spectral-efficiency sweeps."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .design import design, design_upa_mode1, design_upa_mode2, focusing_params
from .errors import (AiryBeamError, AliasingWarning, ConfigurationError,
                     DegenerateChannelError, GeometryError)
from .phase import AiryParams, airy_phase_1d, airy_weights, normalized
from .propagation import (field_at_points, inject_weights, propagate_blocked,
                          read_array_dump, write_array_dump)
from .scenario import (BlockageSpec, Scenario, blockage_ratio, element_positions,
                       simulation_grid, tunnel_interval)

log = logging.getLogger(__name__)

SCHEMES = ("los-digital", "quasilos-digital", "steering", "focusing",
           "airy-closed-form", "airy-exhaustive", "upa-mode1", "upa-mode2")
CSV_HEADER = ["z_b", "edge", "R_bl", "scheme", "SE_bits", "Bx", "Fx", "thetax",
              "By", "Fy", "thetay", "status"]
_CACHE_VERSION = 1


# --------------------------------------------------------------------------
# channels
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelMatrix:
    """``N_r x N_t`` channel; column ``t`` is the field of transmit element ``t``.

    ``reference_gain`` is the largest singular value of the matching unblocked
    channel; spectral efficiencies divide it out so results do not depend on
    the grid's injection scaling.
    """

    entries: np.ndarray
    blocked: bool
    reference_gain: float | None = None

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.complex128)
        if e.ndim != 2 or not np.all(np.isfinite(e)):
            raise ConfigurationError("channel entries must be a finite 2D array")
        object.__setattr__(self, "entries", e)

    @property
    def state(self) -> str:
        return "quasi-LoS" if self.blocked else "LoS"

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def sigma_max(self) -> float:
        return float(np.linalg.norm(self.entries, 2))

    def with_reference(self, gain: float) -> "ChannelMatrix":
        return replace(self, reference_gain=float(gain))


@dataclass(frozen=True)
class LinkBudget:
    """Reference SNR ``rho`` applied to unit-norm weights on a normalized channel."""

    rho: float = 1e4

    def __post_init__(self):
        if not self.rho > 0:
            raise ConfigurationError("rho must be positive")


def scenario_key(s: Scenario, blocked: bool) -> str:
    text = f"v{_CACHE_VERSION}|{blocked}|{s!r}"
    return hashlib.sha256(text.encode()).hexdigest()[:24]


def _simulate_channel(s: Scenario, blocked: bool, batch: int | None) -> np.ndarray:
    grid = simulation_grid(s)
    sc = s if blocked else s.unblocked()
    tx = element_positions(s.tx)
    rx = element_positions(s.rx)
    pts = rx[:, 0] if s.kind == "ULA" else rx[:, :2]
    n_t = len(tx)
    if batch is None:
        batch = max(1, (1 << 23) // grid.size)
    H = np.empty((len(rx), n_t), dtype=np.complex128)
    with warnings.catch_warnings():
        # single-cell sources are deliberately broadband
        warnings.simplefilter("ignore", AliasingWarning)
        for start in range(0, n_t, batch):
            cols = np.arange(start, min(n_t, start + batch))
            w = np.zeros((len(cols), n_t), dtype=np.complex128)
            w[np.arange(len(cols)), cols] = 1.0
            src = inject_weights(grid, tx, w, s.tx.center[2], s.wavelength)
            out = propagate_blocked(src, s.distance, sc)[-1]
            H[:, cols] = field_at_points(out, pts).T
    return H


def build_channel(s: Scenario, blocked: bool = True, cache_dir=None,
                  batch: int | None = None) -> ChannelMatrix:
    """Channel from one ASM run per transmit element (batched), cached on disk if asked."""
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"channel-{scenario_key(s, blocked)}.bin"
        if path.exists():
            H, _ = read_array_dump(path)
            return ChannelMatrix(H, blocked)
    H = _simulate_channel(s, blocked, batch)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        write_array_dump(tmp, H, {"blocked": blocked, "kind": s.kind})
        tmp.replace(path)
    return ChannelMatrix(H, blocked)


@dataclass(frozen=True)
class LinkChannels:
    los: ChannelMatrix
    blocked: ChannelMatrix


def build_link_channels(s: Scenario, cache_dir=None) -> LinkChannels:
    """Unblocked and blocked channels sharing the unblocked reference gain."""
    los = build_channel(s, False, cache_dir)
    ref = los.sigma_max()
    if s.blockages:
        qlos = build_channel(s, True, cache_dir)
    else:
        qlos = replace(los, blocked=True)
    return LinkChannels(los.with_reference(ref), qlos.with_reference(ref))


# --------------------------------------------------------------------------
# weights and spectral efficiency
# --------------------------------------------------------------------------

def _phase_normalize(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-300)
    if nz.size == 0:
        return v
    a = v[nz[0]]
    return v * (abs(a) / a)


def mrt_mrc(H: ChannelMatrix | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dominant right/left singular vectors; first nonzero entries made real-positive."""
    E = H.entries if isinstance(H, ChannelMatrix) else np.asarray(H, dtype=np.complex128)
    if not np.any(E):
        raise DegenerateChannelError("channel matrix is identically zero")
    u, _, vh = np.linalg.svd(E)
    return _phase_normalize(vh[0].conj()), _phase_normalize(u[:, 0])


def mrc(H: ChannelMatrix, w_t: np.ndarray) -> np.ndarray:
    y = H.entries @ w_t
    n = np.linalg.norm(y)
    return y / n if n > 0 else np.zeros_like(y)


def _reference(H: ChannelMatrix) -> float:
    return H.reference_gain if H.reference_gain is not None else H.sigma_max()


def spectral_efficiency(H: ChannelMatrix, w_t: np.ndarray, w_r: np.ndarray,
                        lb: LinkBudget = LinkBudget()) -> float:
    """``log2(1 + rho |w_r^H H w_t|^2 / g_ref^2)`` for unit-norm weights."""
    ref = _reference(H)
    if ref == 0:
        return 0.0
    g = abs(np.vdot(w_r, H.entries @ w_t)) ** 2 / ref ** 2
    return float(np.log2(1 + lb.rho * g))


def _mrc_se(H: ChannelMatrix, W: np.ndarray, lb: LinkBudget) -> np.ndarray:
    """SE with receive MRC for each row of unit-norm transmit weights ``W``."""
    ref = _reference(H)
    if ref == 0:
        return np.zeros(len(W))
    g = np.sum(np.abs(W @ H.entries.T) ** 2, axis=-1) / ref ** 2
    return np.log2(1 + lb.rho * g)


def _rx_direction(s: Scenario) -> np.ndarray:
    c = np.array(s.tx.center)
    d = np.array(s.rx.center) - c
    return d / np.linalg.norm(d)


def steering_weights(s: Scenario) -> np.ndarray:
    """Conjugate far-field response toward the receiver centre."""
    k = 2 * math.pi / s.wavelength
    pos = element_positions(s.tx) - np.array(s.tx.center)
    return normalized(np.exp(1j * k * (pos @ _rx_direction(s))))


def focusing_weights(s: Scenario, point=None) -> np.ndarray:
    """Conjugate spherical phase toward ``point`` (default: receiver centre)."""
    k = 2 * math.pi / s.wavelength
    p = np.array(s.rx.center if point is None else point, dtype=float)
    r = np.linalg.norm(p - element_positions(s.tx), axis=1)
    return normalized(np.exp(-1j * k * r))


@dataclass
class SchemeResult:
    scheme: str
    w_t: np.ndarray
    w_r: np.ndarray
    se: float
    px: AiryParams | None = None
    py: AiryParams | None = None
    status: str = "ok"


def _airy_tx(s: Scenario, px: AiryParams, py: AiryParams | None) -> np.ndarray:
    return normalized(airy_weights(s.tx, px, s.wavelength, py))


def transmit_weights(s: Scenario, scheme: str, ch: LinkChannels, lb: LinkBudget = LinkBudget(),
                     grids: "SearchGrids | None" = None, margins=None):
    """Transmit weights for a scheme plus the beam parameters behind them (or ``None``)."""
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}")
    if scheme == "los-digital":
        return mrt_mrc(ch.los)[0], None, None, "ok"
    if scheme == "quasilos-digital":
        return mrt_mrc(ch.blocked)[0], None, None, "ok"
    upa = s.kind == "UPA"
    if scheme == "steering":
        th = [-math.asin(v) for v in _rx_direction(s)[:2]]
        return (steering_weights(s), AiryParams.steering(th[0]),
                AiryParams.steering(th[1]) if upa else None, "ok")
    if scheme == "focusing":
        return (focusing_weights(s), focusing_params(s, "x"),
                focusing_params(s, "y") if upa else None, "ok")
    if scheme == "airy-exhaustive":
        res = exhaustive_airy_search(s, ch.blocked, grids or SearchGrids(), lb)
        return res.w_t, res.px, res.py, "ok"
    if scheme == "upa-mode1" or scheme == "upa-mode2":
        if not upa:
            raise ConfigurationError(f"{scheme} needs a UPA scenario")
        sol = (design_upa_mode1 if scheme == "upa-mode1" else design_upa_mode2)(s, margins)
    else:
        sol = design(s, margins=margins)
    return _airy_tx(s, sol.px, sol.py), sol.px, sol.py, sol.status


def scheme_weights(s: Scenario, scheme: str, ch: LinkChannels, lb: LinkBudget = LinkBudget(),
                   grids: "SearchGrids | None" = None, margins=None) -> SchemeResult:
    """Evaluate one scheme; the receiver always combines (MRC) on the blocked channel."""
    w_t, px, py, status = transmit_weights(s, scheme, ch, lb, grids, margins)
    w_r = mrc(ch.blocked, w_t)
    return SchemeResult(scheme, w_t, w_r, spectral_efficiency(ch.blocked, w_t, w_r, lb),
                        px, py, status)


# --------------------------------------------------------------------------
# exhaustive Airy search
# --------------------------------------------------------------------------

def _default_B() -> np.ndarray:
    b = np.round(np.arange(-30, 31) * 0.5, 10)
    return b[np.abs(b) >= 0.5]


@dataclass(frozen=True)
class SearchGrids:
    """Parameter grids for the brute-force Airy search (sorted ascending)."""

    B: tuple = tuple(_default_B())
    F: tuple = tuple(np.round(np.arange(3, 31) * 0.1, 10))
    theta: tuple = tuple(np.round(np.arange(-20, 21) * 0.005, 10))

    def __post_init__(self):
        for name in ("B", "F", "theta"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.size == 0:
                raise ConfigurationError(f"search grid {name} is empty")
            object.__setattr__(self, name, tuple(np.sort(v.ravel())))

    @property
    def size(self) -> int:
        return len(self.B) * len(self.F) * len(self.theta)


@dataclass
class SearchResult:
    px: AiryParams
    py: AiryParams | None
    se: float
    w_t: np.ndarray


def _factor_table(x: np.ndarray, grids: SearchGrids, wavelength: float):
    """Per-parameter unit phasors whose product is the Airy profile on ``x``."""
    eb = np.exp(1j * np.outer((2 * np.pi * np.array(grids.B)) ** 3, x ** 3 / 3))
    inv_f = np.array([0.0 if math.isinf(f) else 1 / f for f in grids.F])
    ef = np.exp(-1j * np.pi / wavelength * np.outer(inv_f, x ** 2))
    et = np.exp(-2j * np.pi / wavelength * np.outer(np.sin(grids.theta), x))
    return eb, ef, et


def _search_axis(H: ChannelMatrix, x: np.ndarray, grids: SearchGrids, wavelength: float,
                 lb: LinkBudget, fixed=None, axis_slow: bool = False):
    """Best triple on one axis. ``fixed`` (profile on the other axis) builds UPA weights."""
    eb, ef, et = _factor_table(x, grids, wavelength)
    nf, nt = len(grids.F), len(grids.theta)
    best = (-np.inf, None)
    for i in range(len(grids.B)):
        prof = (eb[i][None, None, :] * ef[:, None, :] * et[None, :, :]).reshape(nf * nt, -1)
        if fixed is not None:
            if axis_slow:      # profile varies along y (slow index)
                prof = (prof[:, :, None] * fixed[None, None, :]).reshape(nf * nt, -1)
            else:
                prof = (fixed[None, :, None] * prof[:, None, :]).reshape(nf * nt, -1)
        prof = prof / np.sqrt(prof.shape[1])
        se = _mrc_se(H, prof, lb)
        j = int(np.argmax(se))
        if se[j] > best[0]:
            best = (float(se[j]), (grids.B[i], grids.F[j // nt], grids.theta[j % nt]), prof[j])
    return best


def exhaustive_airy_search(s: Scenario, H: ChannelMatrix, grids: SearchGrids = SearchGrids(),
                           lb: LinkBudget = LinkBudget()) -> SearchResult:
    """Brute-force ``(B, F, theta)`` maximizing SE on ``H``; ties keep the smallest triple.

    UPA scenarios search one axis at a time: x with the y axis focused on the
    receiver, then y with the best x profile held fixed.
    """
    lam = s.wavelength
    if grids.size == 0:
        raise ConfigurationError("empty search grid")
    ox = s.tx.offsets("x")
    if s.kind == "ULA":
        se, t, w = _search_axis(H, ox, grids, lam, lb)
        return SearchResult(AiryParams(*t), None, se, w)
    oy = s.tx.offsets("y")
    fy = focusing_params(s, "y")
    prof_y = np.exp(1j * airy_phase_1d(oy, fy, lam))
    _, tx_, _ = _search_axis(H, ox, grids, lam, lb, fixed=prof_y, axis_slow=False)
    px = AiryParams(*tx_)
    prof_x = np.exp(1j * airy_phase_1d(ox, px, lam))
    se, ty, w = _search_axis(H, oy, grids, lam, lb, fixed=prof_x, axis_slow=True)
    return SearchResult(px, AiryParams(*ty), se, w)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

def edge_for_ratio(s: Scenario, z_b: float, ratio: float, side: str = "below") -> float:
    """ULA obstacle edge giving blockage ratio ``ratio`` at ``z_b``."""
    lo, hi = tunnel_interval(s, z_b, "x")
    return lo + ratio * (hi - lo) if side == "below" else hi - ratio * (hi - lo)


@dataclass(frozen=True)
class SweepFamily:
    """Scenario points: every ``z_b`` crossed with every obstacle position.

    Positions are given either as absolute ``edges`` or as target blockage
    ``ratios``. ULA obstacles are half-planes on ``side``; UPA obstacles are
    corners ``x <= edge, y <= y_p + d_py`` with the y extent held fixed.
    """

    base: Scenario
    z_b: tuple = ()
    edges: tuple | None = None
    ratios: tuple | None = None
    side: str = "below"
    d_py: float = 0.1
    alpha: float = 0.0

    def __post_init__(self):
        if (self.edges is None) == (self.ratios is None):
            raise ConfigurationError("give exactly one of edges or ratios")

    def points(self) -> list[tuple[float, float]]:
        out = []
        vals = self.edges if self.edges is not None else (self.ratios or ())
        for zb in self.z_b:
            for v in vals:
                if self.edges is not None:
                    out.append((float(zb), float(v)))
                elif self.base.kind == "ULA":
                    out.append((float(zb), edge_for_ratio(self.base, zb, v, self.side)))
                else:
                    lo, hi = tunnel_interval(self.base, zb, "x")
                    out.append((float(zb), lo + v * (hi - lo)))
        return out

    def scenario(self, z_b: float, edge: float) -> Scenario:
        if self.base.kind == "ULA":
            b = BlockageSpec.half_plane(z_b, edge, self.side, self.alpha)
        else:
            t = z_b / self.base.distance
            y_p = (1 - t) * self.base.tx.center[1] + t * self.base.rx.center[1]
            b = BlockageSpec.corner(z_b, edge, y_p + self.d_py, self.alpha)
        return self.base.with_blockages([b])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g") if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return str(v)


def _param_cells(px: AiryParams | None, py: AiryParams | None) -> list:
    out = []
    for p in (px, py):
        out += [None, None, None] if p is None else [float(p.B), float(p.F), float(p.theta)]
    return out


def _sweep_point(args) -> list[list]:
    fam, zb, edge, schemes, lb, grids, cache_dir = args
    rows = []
    try:
        s = fam.scenario(zb, edge)
        ratio = blockage_ratio(s)
        ch = build_link_channels(s, cache_dir)
    except (AiryBeamError, ValueError) as exc:
        return [[zb, edge, None, sc, None] + [None] * 6 + [f"error: {exc}"] for sc in schemes]
    for sc in schemes:
        try:
            r = scheme_weights(s, sc, ch, lb, grids)
            rows.append([zb, edge, ratio, sc, r.se] + _param_cells(r.px, r.py) + [r.status])
        except (AiryBeamError, ValueError) as exc:
            rows.append([zb, edge, ratio, sc, None] + [None] * 6 + [f"error: {exc}"])
    return rows


def sweep(family: SweepFamily, schemes: Sequence[str] = SCHEMES, lb: LinkBudget = LinkBudget(),
          grids: SearchGrids | None = None, cache_dir=None, jobs: int = 1) -> list[list]:
    """Rows ``[z_b, edge, R_bl, scheme, SE, Bx, Fx, thetax, By, Fy, thetay, status]``.

    Row order follows the family's point order and the scheme order given,
    independent of ``jobs``.
    """
    for sc in schemes:
        if sc not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {sc!r}")
    tasks = [(family, zb, e, tuple(schemes), lb, grids, cache_dir)
             for zb, e in family.points()]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(_sweep_point, tasks))
    else:
        chunks = []
        for t in tasks:
            log.info("sweep point z_b=%.4g edge=%.4g", t[1], t[2])
            chunks.append(_sweep_point(t))
    return [row for chunk in chunks for row in chunk]


def rows_to_csv(rows: Iterable[list], out=None) -> str:
    """Serialize sweep rows with the fixed header; floats keep full precision."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text)
    return text
