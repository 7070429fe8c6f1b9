import json
import math

import numpy as np
import pytest
from scipy import special

from nonlocal_delaunay import kernel as kmod
from nonlocal_delaunay import spectrum as sp
from nonlocal_delaunay.errors import BracketFailure, InvalidParameter, RadialDecreaseViolation
from nonlocal_delaunay.quad import QuadConfig

CFG = QuadConfig()
ISO = kmod.make_isotropic(0.5)


def c0_closed(alpha):
    return -2 * special.gamma(-1 - alpha) * math.cos(math.pi * (1 + alpha) / 2)


def mu_iso_closed(alpha, R, k):
    # first term is C0 k^(1+alpha) by homogeneity; second term by Basset's integral
    nu = (1 + alpha) / 2
    c = 2 * R
    mass = c ** (-2 * nu) * math.sqrt(math.pi) * special.gamma(nu) / special.gamma(nu + 0.5)
    osc = mass if k == 0 else 2 * math.sqrt(math.pi) / special.gamma(nu + 0.5) * (k / (2 * c)) ** nu * special.kv(nu, k * c)
    return c0_closed(alpha) * k ** (1 + alpha) - mass - osc


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
def test_fractional_constant(alpha):
    assert sp.fractional_constant(alpha) == pytest.approx(c0_closed(alpha), rel=1e-12)


@pytest.mark.parametrize("k", [0, 1, 2, 7, 33, 64])
def test_mu_k_isotropic_closed_form(k):
    for alpha, R in [(0.5, 0.52), (0.3, 1.7)]:
        K = kmod.make_isotropic(alpha)
        got = sp.mu_k(K, R, k, CFG).value
        assert got == pytest.approx(mu_iso_closed(alpha, R, k), rel=1e-10, abs=1e-11)


def test_mu0_negative_everywhere():
    for K in [ISO, kmod.make_lp_norm(1, 0.5), kmod.make_perturbed_isotropic(0.5, 0.3)]:
        for R in [0.01, 0.5, 3.0, 50.0, 1e4]:
            v = sp.mu_k(K, R, 0, CFG).value
            assert v < 0
            if K.label.startswith(("iso", "lp")):
                # swapping z1 and z2 leaves these kernels unchanged
                assert v == pytest.approx(-2 * 2 * float(K.total_primitive(2 * R)), rel=1e-9)


def test_mu1_increasing_in_R_and_mu_k_increasing_in_R():
    Rs = np.geomspace(0.05, 5, 9)
    for K in [ISO, kmod.make_lp_norm(1, 0.5)]:
        for k in [1, 3]:
            vals = [sp.mu_k(K, R, k, CFG).value for R in Rs]
            assert np.all(np.diff(vals) > 0)


@pytest.mark.parametrize("make", [lambda: kmod.make_isotropic(0.5), lambda: kmod.make_lp_norm(1, 0.5)])
def test_find_rstar_sign_scan_oracle(make):
    K = make()
    R = sp.find_rstar(K, CFG)
    assert abs(sp.mu_k(K, R, 1, CFG).value) <= 10 * CFG.abs_tol
    assert sp.mu_k(K, R / 2, 1, CFG).value < 0 < sp.mu_k(K, 2 * R, 1, CFG).value
    grid = np.geomspace(1e-2, 1e2, 41)
    signs = np.sign([sp.mu_k(K, r, 1, CFG).value for r in grid])
    assert np.count_nonzero(np.diff(signs)) == 1
    j = int(np.nonzero(np.diff(signs))[0][0])
    assert grid[j] < R < grid[j + 1]


def test_find_rstar_bracket_failure():
    # almost no mass on the z1 axis: mu_1 stays negative up to radii ~ 1e24
    eps = 1e-12

    def flat_axis(a, b):
        r2 = a * a + b * b
        return r2 ** -1.25 * (eps + (1 - eps) * b * b / r2)

    weird = kmod.Kernel(evaluate=flat_axis, alpha=0.5, lambda_lower=eps, lambda_upper=1.0,
                        is_homogeneous=True, label="weird")
    with pytest.raises(BracketFailure):
        sp.find_rstar(weird, CFG, bracket=(1.0, 2.0))


def test_kappa_positive_and_matches_radius_derivative():
    for K in [ISO, kmod.make_lp_norm(1, 0.5), kmod.make_lp_norm(1.5, 0.5)]:
        R = 0.6
        kappa = sp.kappa_const(K, R, CFG)
        h = 1e-5 * R
        fd = R * (sp.mu_k(K, R + h, 1, CFG).value - sp.mu_k(K, R - h, 1, CFG).value) / (2 * h)
        assert kappa > 0
        assert kappa == pytest.approx(fd, rel=1e-7)
    flat = kmod.Kernel(evaluate=ISO.evaluate, alpha=0.5, lambda_lower=1, lambda_upper=1, is_homogeneous=True,
                       label="flat", evaluate_dz2=lambda a, b: np.zeros(np.broadcast(a, b).shape))
    with pytest.raises(RadialDecreaseViolation):
        sp.kappa_const(flat, 1.0, CFG)
    with pytest.raises(InvalidParameter):
        sp.kappa_const(ISO, -1.0, CFG)


def test_kappa_converges_with_tolerance():
    loose = sp.kappa_const(ISO, 1.0, QuadConfig(rel_tol=1e-6))
    tight = sp.kappa_const(ISO, 1.0, QuadConfig(rel_tol=1e-12))
    assert abs(loose - tight) <= 1e-6 * tight


def test_spectrum_scan_isotropic_at_rstar():
    R = sp.find_rstar(ISO, CFG)
    rep = sp.spectrum_scan(ISO, R, 64, CFG)
    values = [v for _, v, _ in rep.mu]
    assert values[0] < 0 and abs(values[1]) <= 1e-8
    assert rep.rstar_flag and rep.positivity_ok and rep.ratio_window_ok and rep.increasing_in_k
    for k, v, r in rep.mu[2:]:
        assert v == pytest.approx(mu_iso_closed(0.5, R, k), rel=1e-9)
        assert math.isfinite(r)
    assert rep.reference_constant == pytest.approx(c0_closed(0.5), rel=1e-12)
    assert rep.mu[64][2] == pytest.approx(c0_closed(0.5), rel=1e-2)
    data = json.loads(rep.to_json())
    assert data["mu"][0]["k"] == 0 and data["flags"]["positivity_ok"]
    assert rep.csv_rows().splitlines()[0] == "k,mu,ratio"
    with pytest.raises(InvalidParameter):
        sp.spectrum_scan(ISO, R, 4, CFG)


def test_empirical_epsilon_threshold_is_reported():
    th = sp.empirical_epsilon_threshold(0.5)
    assert 0 < th.threshold <= 0.95
    assert th.probes
    # the probes that passed are all at or below the threshold
    assert all(eps <= th.threshold for eps, ok in th.probes if ok)
