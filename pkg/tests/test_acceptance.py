"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict that the terminal summary prints under
"acceptance criteria". Criteria that the method provably cannot meet at the
stated tolerance are marked ``xfail(strict=True)``: they still run the full
check at the stated tolerance, and an unexpected pass fails the run.
"""

import math
import time
import warnings

import numpy as np
import pytest
from scipy.stats import qmc

from airybeam.analytic import AnalyticContext, closed_form_field_ula, fresnel_oracle, trajectory_ula
from airybeam.design import design_ula, design_upa_mode2, grid_search_B
from airybeam.errors import AliasingWarning, InfeasibleDesignError
from airybeam.evaluation import SweepFamily, sweep
from airybeam.numerics import airy_ai_abs_maxima
from airybeam.phase import AiryParams, airy_weights
from airybeam.propagation import (PropagationSettings, band_limited_power, inject_weights,
                                  propagate_blocked, propagate_free)
from airybeam.numerics import ComplexField, Grid1D, Grid2D
from airybeam.scenario import (BlockageSpec, blockage_ratio, element_positions, simulation_grid,
                               tunnel_interval, ula_scenario, upa_scenario)

from conftest import record_criterion
from scenarios import LAM, random_ula_scenario

FIG3 = AiryParams(5.0, 0.5, -0.03)
RATIOS = (0.5, 0.6, 0.7, 0.8, 0.9)


@pytest.fixture(scope="module")
def cache_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("channels")


@pytest.fixture(scope="module")
def feasible_designs():
    """200 randomized ULA scenarios whose closed-form design exists."""
    rng = np.random.default_rng(7)
    out = []
    while len(out) < 200:
        s = random_ula_scenario(rng)
        try:
            out.append(design_ula(s))
        except InfeasibleDesignError:
            continue
    return out


def test_criterion_01_airy_peak_constants():
    t = time.perf_counter()
    found = airy_ai_abs_maxima(3)
    dt = time.perf_counter() - t
    err = np.abs(found - np.array([-1.0188, -3.248, -4.820]))
    ok = bool(np.all(err <= 1e-2) and dt < 1.0)
    record_criterion(1, ok, f"max |peak - printed| = {err.max():.2e} (tol 1e-2), {dt:.2f} s")
    assert ok


def test_criterion_02_trajectory_vs_simulation():
    t = time.perf_counter()
    s = ula_scenario(256, 256, LAM / 2, 3.0, LAM)
    assert s.propagation.dz <= 5e-3
    g = simulation_grid(s)
    assert g.dx <= LAM / 2
    ctx = AnalyticContext.for_array(s.tx, LAM)
    src = inject_weights(g, element_positions(s.tx), airy_weights(s.tx, FIG3, LAM), 0.0, LAM)
    x = g.coords()
    errs = []
    for z in np.linspace(0.4, 1.2, 20):
        f = propagate_blocked(src, z, s)[-1]
        errs.append(abs(x[np.argmax(np.abs(f.values))] - trajectory_ula(z, FIG3, ctx)))
    dt = time.perf_counter() - t
    ok = max(errs) <= 3e-3 and dt < 120
    record_criterion(2, ok, f"max |simulated peak - trajectory| = {1e3 * max(errs):.3f} mm "
                            f"(tol 3 mm), {dt:.1f} s")
    assert ok


def test_criterion_03_closed_form_vs_quadrature():
    t = time.perf_counter()
    ctx = AnalyticContext(LAM, 255 * (LAM / 2) / 2)
    # validity region: z in [0.4, 1.2] m, x from 10 mm before to 30 mm past the
    # main lobe (main lobe plus the first side lobes)
    u = qmc.Sobol(2, scramble=True, seed=3).random(128)[:100]
    z = 0.4 + 0.8 * u[:, 0]
    x = trajectory_ula(z, FIG3, ctx) - 0.010 + 0.040 * u[:, 1]
    errs = []
    for xi, zi in zip(x, z):
        ref = fresnel_oracle(xi, zi, FIG3, ctx)
        errs.append(abs(closed_form_field_ula(xi, zi, FIG3, ctx) - ref) / abs(ref))
    dt = time.perf_counter() - t
    ok = max(errs) <= 0.02 and dt < 60
    record_criterion(3, ok, f"max relative error = {max(errs):.2e} over 100 points (tol 2%), "
                            f"{dt:.1f} s")
    assert ok


def test_criterion_04_boundary_conditions(feasible_designs):
    t = time.perf_counter()
    worst = 0.0
    for sol in feasible_designs:
        a = sol.anchors
        tol = 1e-9 * max(abs(a.x_s), LAM)
        xb = sol.trajectory(a.z_b, check=False)
        xr = sol.trajectory(a.z_r, check=False)
        worst = max(worst, abs(xb - a.x_s) / tol, abs(xr - a.x_c) / tol)
    dt = time.perf_counter() - t
    ok = worst <= 1.0 and dt < 5
    record_criterion(4, ok, f"worst residual / tolerance = {worst:.2e} on 200 designs, {dt:.2f} s")
    assert ok


@pytest.mark.xfail(strict=True, reason="the closed-form B drops a sextic term that is not small "
                                       "at these apertures; see notes")
def test_criterion_05_closed_form_B_vs_grid(feasible_designs):
    t = time.perf_counter()
    hits = 0
    for sol in feasible_designs:
        Bg, step = grid_search_B(sol.anchors, sol.ctx, n=2000)
        hits += abs(Bg - sol.px.B) <= step
    dt = time.perf_counter() - t
    frac = hits / len(feasible_designs)
    ok = frac >= 0.95 and dt < 60
    record_criterion(5, ok, f"closed-form B within one grid cell in {hits}/200 cases "
                            f"(need >= 95%), {dt:.1f} s")
    assert ok


def _by_scheme(rows):
    out = {}
    for r in rows:
        out.setdefault(r[3], []).append(r[4])
    return {k: np.array(v, dtype=float) for k, v in out.items()}


@pytest.mark.xfail(strict=True, reason="at 64 elements the closed form trails focusing at low "
                                       "blockage and the search gap exceeds 0.5 bit; see notes")
def test_criterion_06_ula_scheme_ordering(cache_dir):
    t = time.perf_counter()
    base = ula_scenario(64, 64, LAM / 2, 3.0, LAM)
    fam = SweepFamily(base, (1.5,), ratios=RATIOS)
    se = _by_scheme(sweep(fam, ("steering", "focusing", "airy-closed-form", "airy-exhaustive"),
                          cache_dir=cache_dir))
    dt = time.perf_counter() - t
    cf = se["airy-closed-form"]
    beats = (cf > se["focusing"]) & (cf > se["steering"])
    gap = se["airy-exhaustive"] - cf
    ok = bool(beats.all() and np.all(gap <= 0.5) and dt < 1800)
    record_criterion(6, ok, f"closed form beats focusing and steering at {beats.sum()}/5 points; "
                            f"max search gap {gap.max():.2f} bit (tol 0.5), {dt:.1f} s")
    assert ok


@pytest.mark.xfail(strict=True, reason="the stated 16x16, 4-lambda planar tunnel is narrower than "
                                       "both obstacle extents, so its ratio is 1; see notes")
def test_criterion_07_blockage_ratio_geometry():
    t = time.perf_counter()
    ula = ula_scenario(256, 256, LAM / 2, 3.0, LAM, [BlockageSpec.half_plane(1.5, 0.071)])
    upa = upa_scenario((16, 16), (16, 16), 4 * LAM, 3.0, LAM,
                       [BlockageSpec.corner(1.5, 0.071, 0.1)])
    r1, r2 = blockage_ratio(ula), blockage_ratio(upa)
    dt = time.perf_counter() - t
    ok = abs(r1 - 0.759) <= 5e-3 and abs(r2 - 0.658) <= 5e-3 and dt < 1
    record_criterion(7, ok, f"ULA R_bl = {r1:.4f} (0.759), UPA R_bl = {r2:.4f} (0.658), tol 0.005")
    assert ok


@pytest.mark.xfail(strict=True, reason="for an 8x8 aperture the Gaussian window, not the Airy "
                                       "argument, sets the intensity peak; see notes")
def test_criterion_08_upa_decoupling():
    t = time.perf_counter()
    base = upa_scenario((8, 8), (8, 8), 4 * LAM, 3.0, LAM)
    lo, hi = tunnel_interval(base, 1.5, "x")
    s = base.with_blockages([BlockageSpec.corner(1.5, lo + 0.7 * (hi - lo), 0.1)])
    sol = design_upa_mode2(s)
    g = simulation_grid(s)
    src = inject_weights(g, element_positions(s.tx), airy_weights(s.tx, sol.px, LAM, sol.py),
                         0.0, LAM)
    free = s.unblocked()
    x, y = g.coords()
    errs = []
    # mid-range: 30% to 70% of the link
    for z in np.linspace(0.3, 0.7, 10) * s.distance:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AliasingWarning)
            f = propagate_blocked(src, z, free)[-1]
        inten = np.abs(f.values) ** 2
        # restrict to the central grating order of the 4-lambda array
        half = z * LAM / (2 * s.tx.pitch)
        inten[~((np.abs(y) < half)[:, None] & (np.abs(x) < half)[None, :])] = 0
        iy, ix = np.unravel_index(np.argmax(inten), inten.shape)
        tx, ty = sol.trajectory(z)
        errs.append((abs(x[ix] - tx), abs(y[iy] - ty)))
    errs = np.array(errs)
    dt = time.perf_counter() - t
    ok = bool(errs.max() <= 5e-3 and dt < 600)
    record_criterion(8, ok, f"max peak error x {1e3 * errs[:, 0].max():.1f} mm, "
                            f"y {1e3 * errs[:, 1].max():.1f} mm (tol 5 mm), {dt:.1f} s")
    assert ok


def test_criterion_09_conservation_and_composition():
    t = time.perf_counter()
    free = PropagationSettings(band_limit=False)
    rng = np.random.default_rng(2024)
    worst_p = worst_c = 0.0
    for grid in (Grid1D(1024, LAM / 2), Grid2D(128, 128, LAM / 2, LAM / 2)):
        for _ in range(5):
            spec = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
            if grid.ndim == 1:
                f2 = grid.freqs() ** 2
            else:
                fx, fy = grid.freqs()
                f2 = fx[None, :] ** 2 + fy[:, None] ** 2
            spec[f2 * LAM ** 2 >= 0.8 ** 2] = 0
            f = ComplexField(grid, 0.0, np.fft.ifftn(spec), LAM)
            a, b = rng.uniform(0.01, 1.0, 2)
            p0 = band_limited_power(f)
            worst_p = max(worst_p, abs(band_limited_power(propagate_free(f, a, free)) - p0) / p0)
            one = propagate_free(f, a + b, free).values
            two = propagate_free(propagate_free(f, a, free), b, free).values
            worst_c = max(worst_c, np.linalg.norm(two - one) / np.linalg.norm(one))
    dt = time.perf_counter() - t
    ok = worst_p <= 1e-9 and worst_c <= 1e-10 and dt < 10
    record_criterion(9, ok, f"power drift {worst_p:.1e} (tol 1e-9), composition {worst_c:.1e} "
                            f"(tol 1e-10), {dt:.2f} s")
    assert ok


@pytest.mark.xfail(strict=True, reason="the closed form gives the non-bending axis a large |B|, "
                                       "costing mode 2 about 1.1 bit; see notes")
def test_criterion_10_mode_equivalence(cache_dir):
    t = time.perf_counter()
    base = upa_scenario((8, 8), (8, 8), 4 * LAM, 3.0, LAM)
    fam = SweepFamily(base, (1.5,), ratios=RATIOS, d_py=0.1)
    se = _by_scheme(sweep(fam, ("upa-mode1", "upa-mode2"), cache_dir=cache_dir))
    dt = time.perf_counter() - t
    gap = np.abs(se["upa-mode1"] - se["upa-mode2"])
    ok = bool(np.all(gap <= 0.3) and dt < 1800)
    record_criterion(10, ok, f"max |SE(mode1) - SE(mode2)| = {gap.max():.2f} bit (tol 0.3), "
                             f"{dt:.1f} s")
    assert ok
