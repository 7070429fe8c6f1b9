"""Linearized curvature spectrum of the straight band and the critical radius.

On cos(k s) the linearization of the band curvature at u = R acts as multiplication by

    mu_k(R) = int_R (1 - cos kt) K(t, 0) dt - int_R (1 + cos kt) K(t, 2R) dt.

mu_1 vanishes at a unique radius R*, where the straight band starts a branch of
non-straight bands with the same constant curvature.
"""

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .errors import AccuracyNotReached, BracketFailure, InvalidParameter, RadialDecreaseViolation
from .quad import IntegralResult, QuadConfig, convolution_multiplier


def _tight(cfg):
    # mu_1 feeds a root finder whose residual target is 10*abs_tol, so integrate well below it
    return QuadConfig(trunc_T=cfg.trunc_T, rel_tol=min(cfg.rel_tol, 1e-13), abs_tol=min(cfg.abs_tol, 1e-15),
                      max_subdivisions=max(cfg.max_subdivisions, 500), lattice_kmax=cfg.lattice_kmax)


def _q(f, a, b, cfg, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                                  limit=int(cfg.max_subdivisions), **kw)
    return val, err


@lru_cache(maxsize=None)
def _axis_term(kernel, k, rel_tol, abs_tol, limit, T):
    """int_R (1 - cos kt) K(t, 0) dt as (value, error)."""
    if k == 0:
        return 0.0, 0.0
    cfg = QuadConfig(trunc_T=T, rel_tol=rel_tol, abs_tol=abs_tol, max_subdivisions=limit)
    t1 = min(1.0, math.pi / k)
    alpha = kernel.alpha
    # near 0 the integrand is ~ t^(-alpha); QAWS takes the power as a weight
    m = kernel.order

    def regular(t):
        # 2 sin^2(kt/2) t^-2 * t^(2+alpha) K(t, 0); both factors stay finite as t -> 0
        tt = max(t, 1e-100)
        return 0.5 * k * k * np.sinc(k * t / (2 * math.pi)) ** 2 * tt ** m * float(kernel(tt, 0.0))

    near, e1 = _q(regular, 0.0, t1, cfg, weight="alg", wvar=(-alpha, 0.0))
    flat, e2 = _q(lambda t: float(kernel(t, 0.0)), t1, np.inf, cfg)
    osc, e3 = _q(lambda t: float(kernel(t, 0.0)), t1, T, cfg, weight="cos", wvar=k)
    osc_tail, e4 = _q(lambda t: float(kernel(t, 0.0)), T, np.inf, cfg, weight="cos", wvar=k)
    return 2 * (near + flat - osc - osc_tail), 2 * (e1 + e2 + e3 + e4)


def mu_k(kernel, R, k, cfg=None):
    if not R > 0:
        raise InvalidParameter("R must be positive")
    k = abs(int(k))
    cfg = _tight(cfg or QuadConfig())
    first, err1 = _axis_term(kernel, k, cfg.rel_tol, cfg.abs_tol, cfg.max_subdivisions, cfg.trunc_T)
    P = lambda t: kernel(t, 2 * R)
    mass = convolution_multiplier(P, 0, cfg, scale=2 * R)
    osc = convolution_multiplier(P, k, cfg, scale=2 * R)
    value = first - mass.value - osc.value
    return IntegralResult(value, err1 + mass.error_estimate + osc.error_estimate,
                          mass.tail_bound + osc.tail_bound)


def fractional_constant(alpha, cfg=None):
    """C0 = int_R (1 - cos s) |s|^(-2-alpha) ds by quadrature."""
    cfg = _tight(cfg or QuadConfig())
    near, _ = _q(lambda t: 0.5 * np.sinc(t / (2 * math.pi)) ** 2, 0.0, 1.0, cfg, weight="alg", wvar=(-alpha, 0.0))
    flat, _ = _q(lambda t: t ** (-2 - alpha), 1.0, np.inf, cfg)
    osc, _ = _q(lambda t: t ** (-2 - alpha), 1.0, np.inf, cfg, weight="cos", wvar=1.0)
    return 2 * (near + flat - osc)


def find_rstar(kernel, cfg=None, bracket=(1e-3, 1e3), n_samples=13):
    """Radius where mu_1 changes sign, with a monotone sample check of mu_1 on the bracket."""
    cfg = cfg or QuadConfig()
    mu1 = lambda R: mu_k(kernel, R, 1, cfg).value
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise InvalidParameter("bracket must satisfy 0 < Rlo < Rhi")
    for _ in range(6):
        if mu1(lo) < 0:
            break
        lo /= 10
    for _ in range(6):
        if mu1(hi) > 0:
            break
        hi *= 10
    Rs = np.geomspace(lo, hi, n_samples)
    vals = np.array([mu1(R) for R in Rs])
    if not (vals[0] < 0 < vals[-1]):
        raise BracketFailure(f"mu_1 has no sign change on [{lo:g}, {hi:g}]")
    if np.any(np.diff(vals) <= 0):
        raise BracketFailure("mu_1 is not increasing on the sampled radii")
    j = int(np.nonzero(vals > 0)[0][0])
    root = optimize.brentq(mu1, Rs[j - 1], Rs[j], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    residual = abs(mu1(root))
    if residual > 10 * cfg.abs_tol:
        raise AccuracyNotReached(f"|mu_1(R*)| = {residual:.3g} above 10*abs_tol", value=root,
                                 error_estimate=residual)
    return root


def kappa_const(kernel, R, cfg=None):
    """kappa = -int_R 2R (1 + cos t) K_z2(t, 2R) dt; positive for radially decreasing kernels."""
    if not R > 0:
        raise InvalidParameter("R must be positive")
    cfg = _tight(cfg or QuadConfig())
    P = lambda t: kernel.dz2(t, 2 * R)
    total = convolution_multiplier(P, 0, cfg, scale=2 * R).value + convolution_multiplier(P, 1, cfg, scale=2 * R).value
    kappa = -2 * R * total
    if not kappa > 0:
        raise RadialDecreaseViolation(f"kappa = {kappa:.3g} is not positive; K is not radially decreasing")
    return kappa


@dataclass
class SpectrumReport:
    R: float
    alpha: float
    mu: list
    kappa: float
    rstar_flag: bool
    positivity_ok: bool
    increasing_in_k: bool
    reference_constant: float
    ratio_window: tuple
    ratio_window_ok: bool
    notes: list = field(default_factory=list)

    def ratios(self):
        return [(k, v, r) for k, v, r in self.mu]

    def to_dict(self):
        return {"R": self.R, "alpha": self.alpha, "kappa": self.kappa,
                "mu": [{"k": k, "value": v, "ratio": r} for k, v, r in self.mu],
                "flags": {"rstar": self.rstar_flag, "positivity_ok": self.positivity_ok,
                          "increasing_in_k": self.increasing_in_k, "ratio_window_ok": self.ratio_window_ok},
                "reference_constant": self.reference_constant, "ratio_window": list(self.ratio_window),
                "notes": self.notes}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def csv_rows(self):
        rows = ["k,mu,ratio"]
        for k, v, r in self.mu:
            rows.append(f"{k},{v!r},{'' if r is None else repr(r)}")
        return "\n".join(rows) + "\n"


def spectrum_scan(kernel, R, kmax=64, cfg=None, rstar_tol=1e-8):
    if kmax < 8:
        raise InvalidParameter("kmax must be at least 8")
    cfg = cfg or QuadConfig()
    alpha = kernel.alpha
    mu = []
    for k in range(kmax + 1):
        v = mu_k(kernel, R, k, cfg).value
        mu.append((k, v, None if k == 0 else v / k ** (1 + alpha)))
    values = np.array([v for _, v, _ in mu])
    try:
        kappa = kappa_const(kernel, R, cfg)
        notes = []
    except RadialDecreaseViolation as exc:
        kappa, notes = float("nan"), [str(exc)]
    c0 = fractional_constant(alpha, cfg)
    window = (0.5 * kernel.lambda_lower * c0, 2 * kernel.lambda_upper * c0)
    tail = [r for k, _, r in mu if 32 <= k <= 64]
    return SpectrumReport(
        R=float(R), alpha=alpha, mu=mu, kappa=kappa,
        rstar_flag=bool(abs(values[1]) <= rstar_tol),
        positivity_ok=bool(np.all(values[2:] > 0)),
        increasing_in_k=bool(np.all(np.diff(values[1:]) > 0)),
        reference_constant=c0, ratio_window=window,
        ratio_window_ok=bool(tail) and all(window[0] <= r <= window[1] for r in tail),
        notes=notes)


@dataclass(frozen=True)
class EpsilonThreshold:
    alpha: float
    threshold: float
    crossed: bool
    probes: tuple


@lru_cache(maxsize=None)
def empirical_epsilon_threshold(alpha, kmax=32, steps=10, eps_max=0.95):
    """Largest perturbation size eps (bisection) for which the perturbed isotropic family
    still has mu_k(R*) > 0 for all 2 <= k <= kmax.

    The family is make_perturbed_isotropic(alpha, eps). When no eps up to eps_max breaks
    positivity, threshold = eps_max and crossed = False.
    """
    from .kernel import make_perturbed_isotropic

    cfg = QuadConfig()
    probes = []

    def positive(eps):
        K = make_perturbed_isotropic(alpha, eps)
        try:
            R = find_rstar(K, cfg)
        except (BracketFailure, AccuracyNotReached):
            probes.append((eps, False))
            return False
        ok = all(mu_k(K, R, k, cfg).value > 0 for k in range(2, kmax + 1))
        probes.append((eps, ok))
        return ok

    if positive(eps_max):
        return EpsilonThreshold(alpha, eps_max, False, tuple(probes))
    lo, hi = 0.0, eps_max
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if positive(mid):
            lo = mid
        else:
            hi = mid
    return EpsilonThreshold(alpha, lo, True, tuple(probes))
