import numpy as np
import pytest

from nonlocal_delaunay import branch as br
from nonlocal_delaunay import curvature as cv
from nonlocal_delaunay import kernel as kmod
from nonlocal_delaunay import spectrum as sp
from nonlocal_delaunay.errors import BandCollapse, InvalidParameter, NotApplicable
from nonlocal_delaunay.quad import QuadConfig

CFG = QuadConfig()
ISO = kmod.make_isotropic(0.5)
L1 = kmod.make_lp_norm(1, 0.5)
S = np.linspace(0, np.pi, 9)


@pytest.fixture(scope="module")
def rstar_iso():
    return sp.find_rstar(ISO, CFG)


@pytest.fixture(scope="module")
def small_branch(rstar_iso):
    return br.continue_branch([0.0, 0.01, 0.02, 0.04, 0.05], ISO, CFG, R_star=rstar_iso)


def test_phi_vanishes_at_trivial_point(rstar_iso):
    vals = br.phi_eval(0.0, 1.0, [0.0, 1.0], S, ISO, rstar_iso, CFG)
    assert np.max(np.abs(vals)) <= 1e-8


@pytest.mark.parametrize("k", [0, 2, 5])
def test_phi_linear_on_modes_is_mu_k(rstar_iso, k):
    coeffs = np.zeros(k + 1)
    coeffs[k] = 1.0
    mu = sp.mu_k(ISO, rstar_iso, k, CFG).value
    vals = br.phi_eval(0.0, 1.0, coeffs, S, ISO, rstar_iso, CFG)
    np.testing.assert_allclose(vals, mu * np.cos(k * S), atol=1e-7 * max(1, abs(mu)))


@pytest.mark.parametrize("K", [ISO, L1])
def test_phi_matches_curvature_divided_difference(K):
    R = 0.5
    a, gamma = 0.01, 1.02
    phi = np.array([0.1, 1.0, -0.3, 0.05])
    w = cv.Profile(np.concatenate([[gamma * R + a * phi[0]], a * phi[1:]]))
    want = (cv.anmc_points(K, w, S, CFG) - cv.h_straight(K, gamma * R, CFG)) / (2 * a)
    got = br.phi_eval(a, gamma, phi, S, K, R, CFG)
    np.testing.assert_allclose(got, want, atol=10 * (CFG.abs_tol + CFG.rel_tol) / a)


def test_band_collapse_guard(rstar_iso):
    with pytest.raises(BandCollapse):
        br.phi_eval(0.5, 1.0, [0.0, 1.0], S, ISO, rstar_iso, CFG)


def test_jacobian_at_trivial_point(rstar_iso):
    N = 8
    J, F = br.assemble_jacobian(0.0, 1.0, np.zeros(N), ISO, rstar_iso, N, 64, CFG)
    assert J.shape == (N + 1, N + 1)
    assert np.max(np.abs(F)) <= 1e-8
    for k in [0] + list(range(2, N + 1)):
        col = k + 1 if k == 0 else k
        mu = sp.mu_k(ISO, rstar_iso, k, CFG).value
        assert J[k, col] == pytest.approx(mu, rel=1e-5)
    kappa = sp.kappa_const(ISO, rstar_iso, CFG)
    # the gamma column only feeds the mode-1 equation, with the positive transversality constant
    assert J[1, 0] == pytest.approx(kappa, rel=1e-5)
    off = J.copy()
    for k in range(2, N + 1):
        off[k, k] = 0.0
    off[0, 1] = 0.0
    off[1, 0] = 0.0
    assert np.max(np.abs(off)) <= 1e-5 * np.max(np.abs(J))


def test_solve_point_trivial_needs_no_iterations(rstar_iso):
    p = br.solve_point(0.0, (1.0, np.zeros(16)), ISO, rstar_iso, 16, CFG)
    assert p.iterations == 0 and p.gamma == 1.0 and not np.any(p.v_coeffs)
    assert br.certify_constant_anmc(p, ISO, rstar_iso, 65, CFG) <= CFG.abs_tol


def test_solve_point_rejects_small_cutoff(rstar_iso):
    with pytest.raises(InvalidParameter):
        br.solve_point(0.01, (1.0, np.zeros(4)), ISO, rstar_iso, 4, CFG)


def test_branch_points_are_certified(small_branch, rstar_iso):
    run = small_branch
    assert [p.a for p in run.points] == [0.0, 0.01, 0.02, 0.04, 0.05]
    for p in run.points:
        assert p.anmc_residual <= 1e-5
        assert p.phi_residual <= 1e-8
        if p.a:
            # mode 1 carries exactly the amplitude, so the prime period is 2 pi
            assert p.w_coeffs(rstar_iso)[1] == pytest.approx(p.a, abs=0)
    assert run.nu_hat["+"] == 0.05


def test_independent_curvature_recheck(small_branch, rstar_iso):
    p = small_branch.points[-1]
    w = p.profile(rstar_iso)
    s = np.linspace(0, np.pi, 13)
    h = cv.h_straight(ISO, p.gamma * rstar_iso, CFG)
    assert np.max(np.abs(cv.anmc_points(ISO, w, s, CFG) - h)) <= 1e-5


def test_halving_envelope_and_quadratic_fit(small_branch, rstar_iso):
    by_a = {p.a: p for p in small_branch.points}
    seq = [by_a[a] for a in (0.04, 0.02, 0.01)]
    env = br.halving_envelope(seq)
    assert env["ok"]
    fit = br.quadratic_fit(seq, rstar_iso)
    assert fit["r2"] >= 0.99


def test_residual_improves_with_more_modes(rstar_iso):
    coarse = br.solve_point(0.2, (1.0, np.zeros(8)), ISO, rstar_iso, 8, CFG)
    fine = br.solve_point(0.2, (1.0, np.zeros(16)), ISO, rstar_iso, 16, CFG)
    rc = br.certify_constant_anmc(coarse, ISO, rstar_iso, 129, CFG)
    rf = br.certify_constant_anmc(fine, ISO, rstar_iso, 129, CFG)
    assert rf < 0.1 * rc


def test_rescaling(small_branch, rstar_iso):
    p = small_branch.points[-1]
    w = br.rescale_homogeneous(p, rstar_iso, ISO)
    assert w.freq == pytest.approx(p.gamma)
    assert w.coeffs[1] == pytest.approx(p.a / p.gamma)
    res = br.rescaled_residual(w, ISO, rstar_iso, 65, CFG)
    assert res <= 10 * p.anmc_residual
    trivial = br.rescale_homogeneous(small_branch.points[0], rstar_iso, ISO)
    np.testing.assert_allclose(trivial.coeffs, small_branch.points[0].w_coeffs(rstar_iso))
    with pytest.raises(NotApplicable):
        br.rescale_homogeneous(p, rstar_iso, kmod.make_perturbed_isotropic(0.5, 0.2))


def test_negative_ray_and_mirror_symmetry(rstar_iso):
    run = br.continue_branch([-0.02, 0.0, 0.02], ISO, CFG, R_star=rstar_iso, N=8)
    assert [p.a for p in run.points] == [-0.02, 0.0, 0.02]
    assert br.mirror_defect(run.points[-1], run.points[0], rstar_iso) <= 1e-8


def test_run_serialization(small_branch):
    import json
    data = json.loads(small_branch.to_json())
    assert data["R_star"] == small_branch.R_star
    assert len(data["points"]) == 5
    lines = small_branch.profile_csv(small_branch.points[1], 5).splitlines()
    assert lines[0] == "s,w" and len(lines) == 6


def test_trivial_grid():
    run = br.continue_branch([0.0], ISO, CFG, N=8)
    assert len(run.points) == 1 and run.points[0].a == 0.0
