import csv
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from descentgen import metrics
from descentgen.errors import DomainError, EmptySubsetError
from descentgen.fpca import AltitudeGrid
from descentgen.metrics import (
    DistanceTriple,
    build_report,
    ecdf,
    kde_pdf,
    ks_distance,
    mae_of_means,
    per_level_distance,
    scott_bandwidth,
    time_to_bottom_distribution,
    wasserstein1,
)
from descentgen.physics import nominal_trajectory


def _traj(h, cas, rocd=None, t=None):
    h = np.asarray(h, dtype=float)
    rocd = np.full(len(h), -10.0) if rocd is None else np.asarray(rocd, dtype=float)
    t = (h.max() - h) / 10.0 if t is None else np.asarray(t, dtype=float)
    return SimpleNamespace(h=h, t=t, v_cas=np.asarray(cas, dtype=float), rocd=rocd)


def _brute_ks(a, b):
    best = Fraction(0)
    for x in list(a) + list(b):
        fa = Fraction(sum(1 for v in a if v <= x), len(a))
        fb = Fraction(sum(1 for v in b if v <= x), len(b))
        best = max(best, abs(fa - fb))
    return float(best)


# ---------------------------------------------------------------- distances

def test_ks_hand_cases():
    assert ks_distance([0, 1], [0, 1]) == 0.0
    assert ks_distance([0, 0], [1, 1]) == 1.0
    assert ks_distance([0, 1], [0.5, 1.5]) == 0.5
    assert _brute_ks([0, 1], [0.5, 1.5]) == 0.5


def test_w1_hand_cases():
    assert wasserstein1([3, 1, 2], [2, 3, 1]) == 0.0
    assert wasserstein1([0, 2], [1, 3]) == pytest.approx(1.0)
    assert wasserstein1([0, 1], [10, 11]) == pytest.approx(10.0)


def test_mae_hand_cases():
    assert mae_of_means([1, 2], [2, 1]) == 0.0
    assert mae_of_means([90, 110], [85, 95]) == pytest.approx(10.0)


@pytest.mark.parametrize("f", [ks_distance, wasserstein1, mae_of_means])
def test_empty_input_rejected(f):
    with pytest.raises(DomainError):
        f([], [1.0])


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=30),
       st.lists(st.floats(-100, 100), min_size=1, max_size=30))
@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_distances_match_scipy(a, b):
    assert ks_distance(a, b) == pytest.approx(stats.ks_2samp(a, b, method="asymp").statistic, abs=1e-12)
    assert ks_distance(a, b) == pytest.approx(_brute_ks(a, b), abs=1e-12)
    assert wasserstein1(a, b) == pytest.approx(stats.wasserstein_distance(a, b), rel=1e-9, abs=1e-9)
    assert ks_distance(a, b) == ks_distance(b, a)
    assert wasserstein1(a, b) == pytest.approx(wasserstein1(b, a), abs=1e-12)
    assert ks_distance(a[::-1], b) == ks_distance(a, b)


def test_w1_triangle_and_translation(rng):
    a, b, c = rng.normal(size=40), rng.normal(1, 2, size=30), rng.exponential(size=50)
    assert wasserstein1(a, c) <= wasserstein1(a, b) + wasserstein1(b, c) + 1e-12
    assert wasserstein1(a, a + 3.0) == pytest.approx(3.0)
    assert wasserstein1(a + 2.5, b) <= wasserstein1(a, b) + 2.5 + 1e-12


def test_distance_triple():
    t = DistanceTriple.between([0, 2], [1, 3])
    assert (t.ks, t.wasserstein, t.mae) == pytest.approx((0.5, 1.0, 1.0))
    assert t.get("w1") == t.wasserstein


# ------------------------------------------------------------ time to bottom

def test_time_to_bottom_constant_rate():
    grid = AltitudeGrid(4572.0, 101)
    span = grid.h_f - grid.h_i
    tr = _traj(np.linspace(grid.h_f + 50, grid.h_i - 50, 40), np.full(40, 140.0))
    np.testing.assert_allclose(time_to_bottom_distribution([tr], grid), [span / 10.0])


def test_time_to_bottom_filters_spanning():
    grid = AltitudeGrid(4572.0, 101)
    full = [_traj(grid.levels[::-1], np.full(101, 140.0)) for _ in range(3)]
    gappy = [_traj(grid.levels[:60][::-1], np.full(60, 140.0)) for _ in range(4)]
    out = time_to_bottom_distribution(full + gappy, grid)
    assert len(out) == sum(1 for tr in full + gappy if tr.h.max() >= grid.h_f and tr.h.min() <= grid.h_i)
    with pytest.raises(EmptySubsetError):
        time_to_bottom_distribution(gappy, grid)


# ---------------------------------------------------------------- per level

def _fleet(rng, grid, n, shift=0.0):
    out = []
    for _ in range(n):
        top = rng.integers(len(grid) // 2, len(grid))
        h = grid.levels[: top + 1][::-1]
        out.append(_traj(h, 140.0 + shift + rng.normal(size=len(h)), -10.0 + rng.normal(size=len(h))))
    return out


def test_per_level_identity_and_shift(rng, cfg):
    grid = AltitudeGrid(4572.0, 228)
    ht = cfg.transition_altitude
    test = _fleet(rng, grid, 30)
    for m in ("ks", "w1", "mae"):
        for q in ("cas", "rocd"):
            above, below = per_level_distance(test, test, grid, q, m, ht)
            assert above == 0.0 and below == 0.0
    shifted = [_traj(t.h, t.v_cas + 5.0, t.rocd, t.t) for t in test]
    above, below = per_level_distance(test, shifted, grid, "cas", "mae", ht)
    assert above == pytest.approx(5.0) and below == pytest.approx(5.0)


def test_per_level_side_absent(rng):
    grid = AltitudeGrid(4572.0, 50)
    test = _fleet(rng, grid, 10)
    above, below = per_level_distance(test, test, grid, "cas", "ks", h_trans=9000.0)
    assert above is None and below == 0.0
    with pytest.raises(DomainError):
        per_level_distance(test, test, grid, "mach", "ks", 9000.0)
    with pytest.raises(DomainError):
        per_level_distance(test, test, grid, "cas", "l2", 9000.0)


def test_per_level_hand_fixture():
    # 5 levels at 0..4 m; transition at 2.5 m puts levels 3, 4 above
    grid = AltitudeGrid(0.0, 5, 1.0)
    h = np.arange(5.0)
    test = [_traj(h, [1, 2, 3, 4, 5]), _traj(h[:3], [2, 2, 2]), _traj(h, [0, 1, 5, 6, 9])]
    gen = [_traj(h, [1, 1, 1, 1, 1]), _traj(h, [3, 3, 3, 3, 3]), _traj(h[:4], [0, 2, 4, 6])]
    vals_t = [[1, 2, 0], [2, 2, 1], [3, 2, 5], [4, 6], [5, 9]]
    vals_g = [[1, 3, 0], [1, 3, 2], [1, 3, 4], [1, 3, 6], [1, 3]]
    per = [_brute_ks(a, b) for a, b in zip(vals_t, vals_g)]
    above, below = per_level_distance(test, gen, grid, "cas", "ks", 2.5)
    assert below == pytest.approx(np.mean(per[:3]), abs=1e-12)
    assert above == pytest.approx(np.mean(per[3:]), abs=1e-12)
    # worked by hand, e.g. level 3: x=3 gives 0 vs 2/3
    assert per == pytest.approx([1 / 3, 1 / 3, 1 / 3, 2 / 3, 1.0])
    _, below_mae = per_level_distance(test, gen, grid, "cas", "mae", 2.5)
    expect = [abs(np.mean(a) - np.mean(b)) for a, b in zip(vals_t[:3], vals_g[:3])]
    assert below_mae == pytest.approx(np.mean(expect))


# ---------------------------------------------------------------------- KDE

def test_kde_matches_scipy(rng):
    x = rng.normal(3.0, 2.0, size=300)
    g = np.linspace(-5, 11, 100)
    np.testing.assert_allclose(kde_pdf(x, g), stats.gaussian_kde(x)(g), rtol=1e-10)


def test_kde_properties(rng):
    x = rng.normal(0.0, 1.0, size=500)
    sd = x.std(ddof=1)
    g = np.linspace(x.mean() - 5 * sd, x.mean() + 5 * sd, 4001)
    pdf = kde_pdf(x, g)
    assert np.all(pdf >= 0)
    assert abs(integrate.trapezoid(pdf, g) - 1.0) < 0.01
    assert abs(g[np.argmax(pdf)]) < 0.3
    assert scott_bandwidth(np.tile(x, 32)) == pytest.approx(scott_bandwidth(x) * 32 ** -0.2, rel=1e-3)
    assert scott_bandwidth([5.0, 5.0, 5.0]) == pytest.approx(5e-6)
    with pytest.raises(DomainError):
        kde_pdf([1.0], g)


def test_ecdf():
    x, y = ecdf([3.0, 1.0, 2.0])
    np.testing.assert_array_equal(x, [1, 2, 3])
    np.testing.assert_allclose(y, [1 / 3, 2 / 3, 1])


# ------------------------------------------------------------------- report

def test_report_identity_and_schema(rng, cfg, tmp_path):
    grid = AltitudeGrid(4572.0, 228)
    test = _fleet(rng, grid, 20) + [_traj(grid.levels[::-1], np.full(228, 140.0))]
    bada = nominal_trajectory(cfg, grid.levels)
    rep = build_report(test, test, bada, grid, cfg)
    assert rep.time_to_bottom == DistanceTriple(0.0, 0.0, 0.0)
    for key, triple in rep.levels.items():
        assert triple == DistanceTriple(0.0, 0.0, 0.0), key
    assert rep.ttb_bada_mae > 0
    ref = build_report(test, _fleet(rng, grid, 20, shift=3.0), bada, grid, cfg)
    assert ref.ttb_bada_mae == rep.ttb_bada_mae
    assert ref.bada_level_mae == rep.bada_level_mae
    rows = rep.rows()
    cells = {(r["quantity"], r["measure"]) for r in rows}
    for q in ("time_to_bottom", "cas_above", "cas_below", "rocd_above", "rocd_below"):
        for m in ("ks", "w1", "mae", "bada_mae"):
            assert (q, m) in cells
    p = tmp_path / "m.csv"
    metrics.write_report_csv(p, [rep])
    with open(p) as fh:
        back = list(csv.DictReader(fh))
    assert len(back) == 20 and back[0].keys() == {"aircraft", "quantity", "measure", "value"}


def test_report_below_transition_only(rng, cfg):
    grid = AltitudeGrid(4572.0, 100)  # tops out near 7600 m, below the B738 transition
    test = _fleet(rng, grid, 10)
    rep = build_report(test, test, None, grid, cfg)
    assert rep.levels[("cas", "above")] is None and rep.levels[("rocd", "above")] is None
    assert rep.levels[("cas", "below")] is not None
    assert all(r["value"] is None for r in rep.rows() if r["quantity"].endswith("above"))


def test_curve_rows(rng):
    rows = metrics.curve_rows(rng.normal(size=50), rng.normal(size=40))
    kinds = {(r["curve"], r["set"]) for r in rows}
    assert kinds == {("ecdf", "test"), ("ecdf", "gen"), ("kde", "test"), ("kde", "gen")}
