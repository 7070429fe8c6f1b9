import math

import numpy as np
import pytest

from oracles import band_perimeter_iso, riesz_brute
from nonlocal_delaunay import curvature as cv
from nonlocal_delaunay import kernel as kmod
from nonlocal_delaunay import perimeter as pm
from nonlocal_delaunay.errors import DegenerateSet, InvalidParameter, InvalidProfile
from nonlocal_delaunay.quad import QuadConfig

CFG = QuadConfig()
ISO = kmod.make_isotropic(0.5)
L1 = kmod.make_lp_norm(1, 0.5)


def band(nx, ny, rows, Y=math.pi, offset=0):
    occ = np.zeros((ny, nx), bool)
    start = (ny - rows) // 2 + offset
    occ[start: start + rows] = True
    return pm.GridSet(occ, Y)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("R", [0.3, 1.0, 2.0])
def test_profile_straight_band_closed_form(alpha, R):
    K = kmod.make_isotropic(alpha)
    res = pm.panp_profile(K, [R], CFG)
    exact = band_perimeter_iso(alpha, R)
    assert res.value > 0
    assert abs(res.value - exact) <= res.error
    assert res.value == pytest.approx(exact, rel=1e-5)


def test_profile_straight_band_matches_curvature():
    # d/dR of the band perimeter is twice the slab length times h_R
    for K in (ISO, L1):
        R = 0.7
        res = pm.panp_profile(K, [R], CFG)
        h = cv.h_straight(K, R, CFG)
        assert res.value == pytest.approx(4 * math.pi * R * h / (1 - K.alpha), rel=1e-7)


def test_pixel_band_matches_closed_form():
    E = band(64, 64, 16)             # |z2| < 8 hy, boundary on cell edges
    R = 8 * E.hy
    res = pm.panp_grid(ISO, E, CFG)
    prof = pm.panp_profile(ISO, [R], CFG)
    assert abs(res.value - band_perimeter_iso(0.5, R)) <= res.error
    assert abs(res.value - prof.value) <= res.error + prof.error


def test_grid_refinement_consistency():
    E = pm.random_gridset(3, 32, 32)
    coarse = pm.panp_grid(ISO, E, CFG)
    fine = pm.panp_grid(ISO, E.refined(), CFG)
    assert abs(fine.value - coarse.value) <= coarse.near_field_error


def test_translation_invariance_is_exact():
    E = pm.random_gridset(11)
    for k in (1, 7, 63):
        assert pm.panp_grid(L1, E.shifted(k), CFG).value == pm.panp_grid(L1, E, CFG).value


def test_rasterized_band_agrees_with_profile():
    u = [1.0, 0.3]
    prof = pm.panp_profile(ISO, u, CFG)
    grid = pm.panp_grid(ISO, pm.rasterize_profile(u, 256, 256, math.pi), CFG)
    assert abs(grid.value - prof.value) <= grid.error + prof.error


def test_rasterized_band_gap_shrinks_at_staircase_rate():
    u = [1.0, 0.3]
    prof = pm.panp_profile(ISO, u, CFG).value
    gaps = [pm.panp_grid(ISO, pm.rasterize_profile(u, n, n, math.pi), CFG).value - prof
            for n in (256, 512, 1024)]
    assert all(g > 0 for g in gaps)
    ratios = np.array(gaps[1:]) / np.array(gaps[:-1])
    np.testing.assert_allclose(ratios, 2 ** -(1 - ISO.alpha), atol=0.02)
    # removing the h^(1 - alpha) term leaves a small fraction of the raw gap
    extrap = gaps[2] + (gaps[2] - gaps[1]) / (2 ** (1 - ISO.alpha) - 1)
    assert abs(extrap) <= 0.01 * gaps[2]


def test_profile_continuous_in_pointwise_enlargement():
    u = np.array([1.0, 0.3])
    base = pm.panp_profile(ISO, u, CFG).value
    steps = [pm.panp_profile(ISO, u + [d, 0.0], CFG).value - base for d in (0.1, 0.05, 0.025)]
    assert all(s > 0 for s in steps)
    assert steps[0] / steps[1] == pytest.approx(2, rel=0.05)
    assert steps[1] / steps[2] == pytest.approx(2, rel=0.05)


def test_profile_rejects_bad_input():
    with pytest.raises(InvalidProfile):
        pm.panp_profile(ISO, [0.2, 0.5], CFG)
    with pytest.raises(InvalidParameter):
        pm.panp_profile(ISO, cv.Profile([1.0, 0.1], freq=2.0), CFG)


def test_degenerate_sets():
    empty = pm.GridSet(np.zeros((8, 8), bool), 1.0)
    with pytest.raises(DegenerateSet, match="empty"):
        pm.panp_grid(ISO, empty, CFG)
    with pytest.raises(DegenerateSet, match="full"):
        pm.panp_grid(ISO, pm.GridSet(np.ones((8, 8), bool), 1.0), CFG)
    with pytest.raises(InvalidParameter):
        pm.GridSet(np.zeros(8, bool), 1.0)


# --- rearrangements -----------------------------------------------------------------

def test_odd_count_surplus_goes_to_lower_index():
    col = np.zeros((6, 1), bool)
    col[[0, 4, 5], 0] = True
    out = pm.rearrange_cylindrical(pm.GridSet(col, 1.0)).occupancy[:, 0]
    assert list(np.flatnonzero(out)) == [1, 2, 3]


@pytest.mark.parametrize("op", [pm.rearrange_cylindrical, pm.rearrange_periodic_symmetric])
def test_rearrangements_idempotent_and_area_preserving(op):
    for seed in range(10):
        E = pm.random_gridset(seed)
        F = op(E)
        assert F.cell_count == E.cell_count
        assert op(F) == F
        axis = 0 if op is pm.rearrange_cylindrical else 1
        np.testing.assert_array_equal(F.occupancy.sum(axis=axis), E.occupancy.sum(axis=axis))


def test_cylindrical_fixed_point_and_vertical_shift():
    E = band(64, 64, 20)
    assert pm.rearrange_cylindrical(E) == E
    S = band(64, 64, 20, offset=9)
    assert pm.rearrange_cylindrical(S) == E
    a, b = pm.panp_grid(ISO, E, CFG), pm.panp_grid(ISO, S, CFG)
    assert abs(a.value - b.value) <= a.error + b.error


def test_periodic_fixed_point_and_horizontal_shift():
    E = pm.rearrange_periodic_symmetric(pm.random_gridset(5))
    assert pm.rearrange_periodic_symmetric(E) == E
    S = E.shifted(13)
    assert pm.rearrange_periodic_symmetric(S) == E
    a, b = pm.panp_grid(ISO, E, CFG), pm.panp_grid(ISO, S, CFG)
    assert abs(a.value - b.value) <= a.error + b.error


@pytest.mark.parametrize("K,op", [
    (ISO, pm.rearrange_cylindrical),
    (kmod.make_lp_norm(1.5, 0.5), pm.rearrange_cylindrical),
    (ISO, pm.rearrange_periodic_symmetric),
    (L1, pm.rearrange_periodic_symmetric),
])
def test_rearrangement_does_not_increase_perimeter(K, op):
    rows = pm.monotonicity_suite(K, op, range(8), cfg=CFG)
    assert len(rows) == 8
    assert not any(r["violation"] for r in rows)
    # random rectangles are never already rearranged, so the decrease is visible
    assert all(r["margin"] < -r["error"] for r in rows)
    csv = pm.suite_csv(rows).splitlines()
    assert csv[0] == "seed,panp_before,panp_after,margin,error" and len(csv) == 9


def test_serialization_round_trip():
    E = pm.random_gridset(2, 40, 24, 1.5)
    assert pm.GridSet.from_rle(E.to_rle()) == E
    pgm = E.to_pgm()
    header = b"P5\n40 24\n255\n"
    assert pgm.startswith(header)
    img = np.frombuffer(pgm[len(header):], np.uint8).reshape(24, 40)
    np.testing.assert_array_equal(img[::-1] == 0, E.occupancy)
    with pytest.raises(InvalidParameter):
        pm.GridSet.from_rle("gridset 4 1 1.0\n1:3\n")


def test_rasterize_disk_area_and_symmetry():
    for omega in (0.05, 0.5):
        E = pm.rasterize_disk(omega, 256)
        assert abs(E.area - omega) <= 0.5 * E.hx * E.hy
        occ = E.occupancy
        assert E.hx == pytest.approx(E.hy)
        # nearest cells to the origin: the set sits inside a disk slightly larger than its own
        y, x = np.nonzero(occ)
        r = np.hypot(E.x_centers()[x], E.y_centers()[y])
        assert r.max() <= math.sqrt(omega / math.pi) + E.hx


# --- g function and circle Riesz ---------------------------------------------------------

def test_g_monotone_isotropic_strict():
    rep = pm.check_g_monotone(ISO, [0.1, 1.0, 5.0], 128, CFG)
    assert rep["mode"] == "strict" and rep["ok"]


@pytest.mark.parametrize("p", [1, 1.5])
def test_g_monotone_lp(p):
    # both exponents pass the strict complete-monotonicity check in tau = t^2,
    # which is stronger than the nonincreasing property asked of class (1)
    rep = pm.check_g_monotone(kmod.make_lp_norm(p, 0.5), [0.1, 1.0, 5.0], 128, CFG)
    assert rep["mode"] == "strict" and rep["ok"]
    assert all(r["max_step"] < 0 for r in rep["samples"])


def test_g_monotone_report_only_without_class():
    rep = pm.check_g_monotone(kmod.make_lp_norm(3, 0.5), [0.1, 1.0], 64, CFG)
    assert rep["mode"] == "report-only" and rep["ok"] and len(rep["samples"]) == 2
    with pytest.raises(InvalidParameter):
        pm.check_g_monotone(ISO, [0.0], 16, CFG)


def circle_g(n):
    return np.array([n - min(d, n - d) for d in range(n)])


def test_rearrange_circle_is_centered_permutation():
    f = np.array([3, 0, 5, 1, 2, 4])
    fs = pm.rearrange_circle(f)
    assert sorted(fs) == sorted(f)
    # values fall off from the center cell in alternating fashion
    assert list(fs) == [1, 3, 5, 4, 2, 0]


def test_riesz_equality_cases():
    n = 12
    g = circle_g(n)
    rng = np.random.default_rng(1)
    h = rng.integers(0, 5, n)
    r = pm.riesz_circle_check(np.full(n, 3), g, h)
    assert r["equal"] and r["exact"]
    fs, hs = pm.rearrange_circle(rng.integers(0, 5, n)), pm.rearrange_circle(h)
    assert pm.riesz_circle_check(fs, g, hs)["equal"]
    assert pm.riesz_circle_check(np.roll(fs, 4), g, np.roll(hs, 4))["equal"]


def test_riesz_random_triples_exact():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(3, 20))
        f, h = rng.integers(0, 6, n), rng.integers(0, 6, n)
        g = np.sort(rng.integers(0, 9, n // 2 + 1))[::-1]
        g = np.concatenate([g, g[1: n - n // 2][::-1]])
        assert np.array_equal(g, g[(-np.arange(n)) % n])
        r = pm.riesz_circle_check(f, g, h)
        assert r["lhs"] == riesz_brute(f, g, h)
        assert r["rhs"] == riesz_brute(pm.rearrange_circle(f), g, pm.rearrange_circle(h))
        assert r["ok"]


def test_riesz_strict_unless_common_translate():
    n = 16
    g = circle_g(n)
    rng = np.random.default_rng(3)
    for _ in range(300):
        f, h = (rng.random(n) < 0.5).astype(int), (rng.random(n) < 0.5).astype(int)
        if f.sum() in (0, n) or h.sum() in (0, n):
            continue
        fs, hs = pm.rearrange_circle(f), pm.rearrange_circle(h)
        common = any(np.array_equal(np.roll(fs, z), f) and np.array_equal(np.roll(hs, z), h) for z in range(n))
        assert pm.riesz_circle_check(f, g, h)["equal"] == common


def test_riesz_length_mismatch():
    with pytest.raises(InvalidParameter):
        pm.riesz_circle_check([1, 2], [1, 0, 0], [1, 1])


# --- first variation and balls vs bands ------------------------------------------------------

def test_first_variation_zero_direction():
    r = pm.first_variation_check(ISO, [1.0], [0.0], 1e-2, CFG)
    assert r["discrepancy"] == 0.0 and r["derivative"] == 0.0


def test_first_variation_constant_direction():
    r = pm.first_variation_check(ISO, [1.0], [1.0], 1e-2, CFG)
    h = cv.h_straight(ISO, 1.0, CFG)
    assert r["derivative"] == pytest.approx(2 * 2 * math.pi * h, rel=1e-5)
    assert r["relative"] <= 1e-4


def test_first_variation_nonconstant_profile():
    r = pm.first_variation_check(ISO, [1.0, 0.3], [0.0, 1.0], 1e-2, CFG)
    assert r["relative"] <= 1e-4
    plain = pm.first_variation_check(ISO, [1.0, 0.3], [0.0, 1.0], 1e-2, CFG, richardson=False)
    assert r["discrepancy"] < plain["discrepancy"]


def test_balls_beat_band_at_small_volume():
    r = pm.compare_ball_cylinder(ISO, 0.05, CFG)
    assert r["winner"] == "balls"
    assert r["panp_balls"] + r["balls_error"] < r["panp_band"] - r["band_error"]
    with pytest.raises(InvalidParameter):
        pm.compare_ball_cylinder(ISO, 40.0, CFG)


def test_band_branch_slope():
    omegas = np.geomspace(0.02, 2, 7)
    vals = [pm.panp_profile(ISO, [w / (4 * math.pi)], CFG).value for w in omegas]
    slope = np.polyfit(np.log(omegas), np.log(vals), 1)[0]
    assert slope == pytest.approx(1 - ISO.alpha, abs=1e-6)
