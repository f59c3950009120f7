import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from airybeam.errors import ConfigurationError, DegenerateChannelError
from airybeam.evaluation import (CSV_HEADER, SCHEMES, ChannelMatrix, LinkBudget, SearchGrids,
                                 SweepFamily, build_channel, build_link_channels,
                                 edge_for_ratio, exhaustive_airy_search, focusing_weights,
                                 mrc, mrt_mrc, rows_to_csv, scheme_weights, spectral_efficiency,
                                 steering_weights, sweep)
from airybeam.phase import AiryParams, airy_weights, normalized
from airybeam.scenario import (BlockageSpec, blockage_ratio, element_positions, ula_scenario,
                               upa_scenario, wavelength_from_frequency)

LAM = wavelength_from_frequency(140e9)
DESK = ula_scenario(64, 64, LAM / 2, 3.0, LAM)


def _random_matrix(seed, shape=(8, 8)):
    rng = np.random.default_rng(seed)
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


@pytest.fixture(scope="module")
def desk_channels(tmp_path_factory):
    edge = edge_for_ratio(DESK, 1.5, 0.7)
    s = DESK.with_blockages([BlockageSpec.half_plane(1.5, edge)])
    return s, build_link_channels(s, tmp_path_factory.mktemp("cache"))


# ---------------------------------------------------------------- MRT / MRC and SE

def test_rank_one_channel():
    a = np.array([1, 2j, -1, 0.5])
    b = np.array([0.3, 1 - 1j, 2])
    wt, wr = mrt_mrc(np.outer(a, b.conj()))
    assert abs(abs(np.vdot(wt, b)) - np.linalg.norm(b)) < 1e-12
    assert abs(abs(np.vdot(wr, a)) - np.linalg.norm(a)) < 1e-12
    assert wt[0].imag == 0 and wt[0].real > 0


def _power_iteration(E, iters=2000):
    v = np.ones(E.shape[1], complex)
    for _ in range(iters):
        v = E.conj().T @ (E @ v)
        v /= np.linalg.norm(v)
    return v


@pytest.mark.parametrize("seed", range(5))
def test_mrt_matches_power_iteration(seed):
    E = _random_matrix(seed)
    wt, wr = mrt_mrc(E)
    v = _power_iteration(E)
    v *= abs(v[0]) / v[0]
    assert np.allclose(wt, v, atol=1e-8)
    assert abs(np.vdot(wr, E @ wt)) == pytest.approx(np.linalg.norm(E, 2), rel=1e-12)


def test_zero_channel():
    with pytest.raises(DegenerateChannelError):
        mrt_mrc(np.zeros((3, 3)))
    H = ChannelMatrix(np.zeros((3, 3)), True)
    assert spectral_efficiency(H, normalized(np.ones(3)), normalized(np.ones(3))) == 0.0


@given(st.integers(0, 10000), st.floats(1.0, 1e8))
@settings(max_examples=50, deadline=None)
def test_doubling_rho_adds_at_most_one_bit(seed, rho):
    H = ChannelMatrix(_random_matrix(seed, (4, 5)), True)
    wt, wr = mrt_mrc(H)
    a = spectral_efficiency(H, wt, wr, LinkBudget(rho))
    b = spectral_efficiency(H, wt, wr, LinkBudget(2 * rho))
    assert 0 < b - a <= 1 + 1e-12


@given(st.integers(0, 10000), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
@settings(max_examples=50, deadline=None)
def test_mrt_mrc_bound_and_phase_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    H = ChannelMatrix(_random_matrix(seed, (6, 6)), True)
    wt, wr = mrt_mrc(H)
    top = spectral_efficiency(H, wt, wr)
    assert top == pytest.approx(math.log2(1 + 1e4), rel=1e-12)
    w = normalized(np.exp(1j * rng.uniform(0, 2 * np.pi, 6)))
    se = spectral_efficiency(H, w, mrc(H, w))
    assert se <= top + 1e-12
    assert spectral_efficiency(H, w * np.exp(1j * a), mrc(H, w) * np.exp(1j * b)) \
        == pytest.approx(se, rel=1e-12)


def test_link_budget_validation():
    with pytest.raises(ConfigurationError):
        LinkBudget(0.0)


# ---------------------------------------------------------------- channels

def test_desk_channel_matches_spherical_waves():
    H = build_channel(DESK, blocked=False).entries
    tx, rx = element_positions(DESK.tx), element_positions(DESK.rx)
    r = np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=2)
    G = np.exp(1j * 2 * np.pi / LAM * r) / r
    c = np.vdot(G, H) / np.vdot(G, G)
    assert np.max(np.abs(H - c * G) / np.abs(c * G)) <= 0.05


def test_channel_sanity():
    H = build_channel(ula_scenario(16, 16, LAM / 2, 1.0, LAM), blocked=False).entries
    assert np.all(np.isfinite(H)) and np.all(np.abs(H) > 0)


def test_channel_cache_roundtrip(tmp_path):
    s = ula_scenario(8, 8, LAM / 2, 1.0, LAM, [BlockageSpec.half_plane(0.5, 0.0)])
    a = build_channel(s, True, tmp_path)
    assert len(list(tmp_path.glob("channel-*.bin"))) == 1
    b = build_channel(s, True, tmp_path)
    assert np.array_equal(a.entries, b.entries)


def test_quasilos_digital_below_los_digital(desk_channels):
    _, ch = desk_channels
    se_q = spectral_efficiency(ch.blocked, *mrt_mrc(ch.blocked))
    se_l = spectral_efficiency(ch.los, *mrt_mrc(ch.los))
    assert se_q <= se_l


# ---------------------------------------------------------------- schemes

def test_focusing_weights_unit_modulus_spherical():
    w = focusing_weights(DESK) * math.sqrt(64)
    assert np.allclose(np.abs(w), 1)
    x = element_positions(DESK.tx)[:, 0]
    r = np.sqrt(3.0 ** 2 + x ** 2)
    assert np.allclose(w * np.exp(1j * 2 * np.pi / LAM * r), w[0] * np.exp(1j * 2 * np.pi / LAM * r[0]))


def test_steering_is_focusing_limit():
    w_s = steering_weights(DESK)
    w_f = focusing_weights(DESK, point=(0.0, 0.0, 1e9))
    assert abs(np.vdot(w_s, w_f)) == pytest.approx(1.0, abs=1e-9)
    w_a = normalized(airy_weights(DESK.tx, AiryParams(0.0, 1e12, 0.0), LAM))
    assert abs(np.vdot(w_s, w_a)) == pytest.approx(1.0, abs=1e-9)


def test_unknown_scheme(desk_channels):
    s, ch = desk_channels
    with pytest.raises(ConfigurationError):
        scheme_weights(s, "magic", ch)
    with pytest.raises(ConfigurationError):
        scheme_weights(s, "upa-mode1", ch)


def test_los_digital_is_best_on_unblocked_channel():
    s = DESK
    ch = build_link_channels(s)
    ses = {sc: scheme_weights(s, sc, ch, grids=SearchGrids((1.0,), (3.0,), (0.0,))).se
           for sc in ("los-digital", "steering", "focusing", "airy-exhaustive")}
    assert all(ses["los-digital"] >= v - 1e-12 for v in ses.values())


def test_single_point_grid_returns_that_point(desk_channels):
    s, ch = desk_channels
    g = SearchGrids((2.5,), (1.1,), (-0.01,))
    res = exhaustive_airy_search(s, ch.blocked, g)
    assert (res.px.B, res.px.F, res.px.theta) == (2.5, 1.1, -0.01)
    w = normalized(airy_weights(s.tx, res.px, LAM))
    assert res.se == pytest.approx(spectral_efficiency(ch.blocked, w, mrc(ch.blocked, w)), rel=1e-12)


def test_search_monotone_in_grid(desk_channels):
    s, ch = desk_channels
    small = SearchGrids((3.0, 6.0), (0.7, 1.2), (0.0,))
    big = SearchGrids((3.0, 4.5, 6.0), (0.7, 0.9, 1.2), (-0.01, 0.0))
    a = exhaustive_airy_search(s, ch.blocked, small).se
    b = exhaustive_airy_search(s, ch.blocked, big).se
    assert b >= a


def test_search_dominates_closed_form_on_its_grid(desk_channels):
    s, ch = desk_channels
    cf = scheme_weights(s, "airy-closed-form", ch)
    g = SearchGrids((cf.px.B, 1.0), (cf.px.F,), (cf.px.theta,))
    assert exhaustive_airy_search(s, ch.blocked, g).se >= cf.se - 1e-12


def test_search_tie_break_is_lexicographic():
    s = ula_scenario(4, 4, LAM / 2, 1.0, LAM)
    H = ChannelMatrix(np.zeros((4, 4)), True, reference_gain=1.0)
    res = exhaustive_airy_search(s, H, SearchGrids((2.0, -1.0), (2.0, 1.0), (0.01, 0.0)))
    assert (res.px.B, res.px.F, res.px.theta) == (-1.0, 1.0, 0.0)


def test_empty_grid_rejected():
    with pytest.raises(ConfigurationError):
        SearchGrids((), (1.0,), (0.0,))


# ---------------------------------------------------------------- sweeps

def test_empty_family_gives_header_only():
    fam = SweepFamily(DESK, (), ratios=(0.5,))
    assert rows_to_csv(sweep(fam)) == ",".join(CSV_HEADER) + "\n"


def test_sweep_rows_and_ratio(tmp_path):
    base = ula_scenario(16, 16, LAM / 2, 1.0, LAM)
    fam = SweepFamily(base, (0.5,), ratios=(0.6, 0.8))
    rows = sweep(fam, ("focusing", "airy-closed-form"), cache_dir=tmp_path)
    assert [r[3] for r in rows] == ["focusing", "airy-closed-form"] * 2
    assert rows[0][2] == pytest.approx(0.6) and rows[2][2] == pytest.approx(0.8)
    text = rows_to_csv(rows, tmp_path / "out.csv")
    assert (tmp_path / "out.csv").read_text() == text
    assert float(text.splitlines()[1].split(",")[4]) == rows[0][4]


def test_sweep_records_point_errors():
    base = ula_scenario(16, 16, LAM / 2, 1.0, LAM)
    fam = SweepFamily(base, (0.5,), edges=(50.0,))
    rows = sweep(fam, ("airy-closed-form",))
    assert rows[0][4] is None and rows[0][-1].startswith("error")


def test_upa_family_uses_corner_obstacle():
    base = upa_scenario((4, 4), (4, 4), 4 * LAM, 1.0, LAM)
    fam = SweepFamily(base, (0.5,), ratios=(0.7,), d_py=0.1)
    (zb, edge), = fam.points()
    s = fam.scenario(zb, edge)
    b = s.blockages[0]
    assert b.y_range == (-math.inf, 0.1)
    assert blockage_ratio(s) == pytest.approx(0.7)


def test_family_needs_one_position_kind():
    with pytest.raises(ConfigurationError):
        SweepFamily(DESK, (1.5,))


def test_scheme_list_is_complete():
    assert set(SCHEMES) == {"los-digital", "quasilos-digital", "steering", "focusing",
                            "airy-closed-form", "airy-exhaustive", "upa-mode1", "upa-mode2"}
