"""One-dimensional singular and improper integration primitives.

Everything here is deterministic: fixed Gauss rules on geometric panels near
singular points, and QUADPACK (through scipy) where adaptivity is needed.
"""

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft, integrate, special

from .errors import (AccuracyNotReached, InvalidParameter, PVDivergence, SingularArgument,
                     Underdetermined)

_GL10 = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class QuadConfig:
    trunc_T: float = 50.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 200
    lattice_kmax: int = 64
    tail_constant_policy: str = "use-Lambda-bound"

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise InvalidParameter("rel_tol and abs_tol must be positive")
        if not self.trunc_T >= 4 * math.pi:
            raise InvalidParameter("trunc_T must be at least 4*pi")
        if int(self.lattice_kmax) != self.lattice_kmax or self.lattice_kmax < 8:
            raise InvalidParameter("lattice_kmax must be an integer >= 8")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise InvalidParameter("max_subdivisions must be a positive integer")
        if self.tail_constant_policy != "use-Lambda-bound":
            raise InvalidParameter("tail_constant_policy must be 'use-Lambda-bound'")


@dataclass(frozen=True)
class IntegralResult:
    value: float
    error_estimate: float
    tail_bound: float = 0.0


def _quad(f, a, b, cfg, **kw):
    """scipy quad that raises AccuracyNotReached instead of warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                             limit=int(cfg.max_subdivisions), full_output=1, **kw)
    val, err = out[0], out[1]
    # a fourth element (the QUADPACK message) is only present when ier != 0
    failed = len(out) > 3
    if failed and not err <= max(cfg.abs_tol, cfg.rel_tol * abs(val)) * 10:
        raise AccuracyNotReached(f"quadrature did not converge on [{a}, {b}]", value=val, error_estimate=err)
    return val, err


def _iso_power_tail(alpha, p, q):
    """int_q^inf (p^2 + tau^2)^(-(2+alpha)/2) dtau for q >= 0."""
    b = (1.0 + alpha) / 2.0
    w = p * p / (p * p + q * q)
    return 0.5 * abs(p) ** (-1 - alpha) * special.beta(0.5, b) * special.betainc(b, 0.5, w)


def g_of(kernel, p, q, cfg):
    """G(p, q) = int_0^q K(p, tau) dtau, odd in q; q may be +inf."""
    p = abs(float(p))
    q = float(q)
    if p == 0.0:
        raise SingularArgument("G(p, q) needs p != 0")
    if q == 0.0:
        return IntegralResult(0.0, 0.0, 0.0)
    sign = 1.0 if q > 0 else -1.0
    aq = abs(q)

    # tau = p sinh(x) keeps the integrand O(1) wide in x whatever the ratio q/p
    def integrand(x):
        return float(kernel(p, p * math.sinh(x))) * p * math.cosh(x)

    if math.isinf(aq):
        cut = max(10.0, 10.0 * p)
        val, err = _quad(integrand, 0.0, math.asinh(cut / p), cfg)
        tail, tail_err = _quad(lambda tau: float(kernel(p, tau)), cut, np.inf, cfg)
        bound = kernel.lambda_upper * _iso_power_tail(kernel.alpha, p, cut)
        return IntegralResult(sign * (val + tail), err + tail_err, bound)
    val, err = _quad(integrand, 0.0, math.asinh(aq / p), cfg)
    return IntegralResult(sign * val, err, 0.0)


def _dyadic_gauss_jacobi(t_top, blowup, depth_tol, n):
    t_min = depth_tol ** (1.0 / (1.0 - blowup))
    n_panels = max(1, int(math.ceil(math.log2(t_top / t_min))))
    xg, wg = np.polynomial.legendre.leggauss(n)
    hi = t_top * 0.5 ** np.arange(n_panels)
    lo = hi * 0.5
    half = 0.5 * (hi - lo)
    nodes = (lo[:, None] + half[:, None] * (xg + 1.0)).ravel()
    weights = (half[:, None] * wg).ravel()
    # innermost panel [0, t0] with weight t^(-blowup) built into the rule
    t0 = lo[-1]
    xj, wj = special.roots_jacobi(n, 0.0, -blowup)
    tj = 0.5 * t0 * (xj + 1.0)
    wj = wj * (0.5 * t0) ** (1.0 - blowup) * tj ** blowup
    return np.concatenate([nodes, tj]), np.concatenate([weights, wj]), n_panels


def graded_rule(t_top, blowup, depth_tol, n=16):
    """Nodes and weights on (0, t_top] for integrands that grow like t^(-blowup) at 0.

    Dyadic panels down to depth_tol^(1/(1-blowup)), then a Gauss-Jacobi panel that
    absorbs the power singularity exactly.
    """
    if not 0.0 <= blowup < 1.0:
        raise InvalidParameter("blowup exponent must lie in [0, 1)")
    x, w, _ = _dyadic_gauss_jacobi(float(t_top), float(blowup), float(depth_tol), int(n))
    return x, w


def panel_rule(edges, n):
    """Composite n-point Gauss-Legendre rule on consecutive edges."""
    edges = np.asarray(edges, float)
    xg, wg = np.polynomial.legendre.leggauss(n)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    return (lo[:, None] + half[:, None] * (xg + 1.0)).ravel(), (half[:, None] * wg).ravel()


def pv_symmetric(integrand, blowup_exponent, cfg, breakpoints=None, decay_exponent=None):
    """Principal value of int_R f over |t| <= trunc_T, computed as int_0^T (f(t) + f(-t)) dt.

    `blowup_exponent` bounds the growth of f(t) + f(-t) near 0 (like t^(-blowup_exponent)).
    The returned value excludes |t| > trunc_T; tail_bound estimates that piece from the
    envelope on [T/2, T] and the power `decay_exponent` (estimated when not given).
    """
    T = float(cfg.trunc_T)
    beta = float(blowup_exponent)
    if not 0.0 <= beta < 1.0:
        raise InvalidParameter("blowup_exponent must lie in [0, 1)")

    def sym(t):
        return np.asarray(integrand(t), float) + np.asarray(integrand(-t), float)

    bps = sorted({float(b) for b in (breakpoints or []) if 0 < b < T})
    t_top = min([1.0, T] + bps)
    edges = np.unique(np.concatenate([[t_top], bps, np.arange(math.ceil(t_top), math.ceil(T)), [T]]))
    edges = edges[(edges >= t_top) & (edges <= T)]

    results = []
    for n in (16, 12):
        xg, wg, n_panels = _dyadic_gauss_jacobi(t_top, beta, cfg.rel_tol, n)
        xo, wo = panel_rule(edges, n)
        fg = sym(xg)
        if n == 16:
            # dyadic panel contributions must shrink towards 0 for an integrable singularity
            per_panel = np.abs((wg[:-n] * fg[:-n]).reshape(n_panels, n).sum(axis=1))
            inner = per_panel[-4:]
            if inner.size >= 3 and np.all(np.diff(inner) > 0) and inner[-1] > cfg.abs_tol:
                raise PVDivergence("symmetrized integrand is not integrable at 0")
        results.append(np.sum(wg * fg) + np.sum(wo * sym(xo)))
    value, coarse = results
    err = abs(value - coarse)

    ts = np.linspace(T / 2, T, 65)
    env_hi = np.max(np.abs(sym(ts)) * ts ** (decay_exponent or 0.0)) if decay_exponent else None
    if decay_exponent is None:
        lo_env = np.max(np.abs(sym(np.linspace(T / 4, T / 2, 65))))
        hi_env = np.max(np.abs(sym(ts)))
        if hi_env == 0.0:
            return IntegralResult(float(value), float(err), 0.0)
        d = math.log2(lo_env / hi_env) if lo_env > 0 else 0.0
        if d <= 1.01:
            raise AccuracyNotReached("cannot bound the tail beyond trunc_T; pass decay_exponent",
                                     value=float(value), error_estimate=float(err))
        env_hi, decay_exponent = hi_env * (T / 2) ** d, d
    tail = env_hi * T ** (1.0 - decay_exponent) / (decay_exponent - 1.0)
    return IntegralResult(float(value), float(err), float(tail))


def lattice_g(kernel, s, x2, cfg):
    """g(s) = sum_k K(s + 2 pi k, x2), truncated at |k| <= lattice_kmax."""
    s = np.asarray(s, float)
    x2 = float(x2)
    red = s - 2 * np.pi * np.round(s / (2 * np.pi))
    if x2 == 0.0 and np.any(red == 0.0):
        raise SingularArgument("g is singular at s in 2*pi*Z when x2 = 0")
    kmax = int(cfg.lattice_kmax)
    k = np.concatenate([np.arange(-kmax, 0), np.arange(kmax, -1, -1)])
    # |s + 2 pi k| >= 2 pi |k| - pi once s is reduced to [-pi, pi]
    vals = kernel(red[..., None] + 2 * np.pi * k, x2)
    m = kernel.order
    tail = 2 * kernel.lambda_upper * (2 * np.pi) ** (-m) * special.zeta(m, kmax + 0.5)
    value = np.sum(vals, axis=-1)
    err = 4 * np.finfo(float).eps * value * math.sqrt(2 * kmax + 1)
    if value.ndim == 0:
        return IntegralResult(float(value), float(err), float(tail))
    return IntegralResult(value, err, float(tail))


def cosine_project(samples, N=None):
    """Cosine coefficients from M equispaced samples on [0, pi], endpoints included.

    With N omitted all M coefficients are returned and cosine_eval inverts the map
    exactly on the grid; an explicit N truncates the discrete transform.
    """
    y = np.asarray(samples, float)
    M = y.shape[-1]
    if M < 2:
        raise Underdetermined("need at least two samples")
    if N is not None and M < 2 * N + 1:
        raise Underdetermined(f"{M} samples cannot determine {N + 1} cosine modes (need M >= 2N+1)")
    c = fft.dct(y, type=1, axis=-1) / (M - 1)
    c[..., 0] *= 0.5
    c[..., -1] *= 0.5
    return c if N is None else c[..., : N + 1].copy()


def cosine_eval(coeffs, s):
    coeffs = np.asarray(coeffs, float)
    s = np.asarray(s, float)
    return np.cos(s[..., None] * np.arange(coeffs.shape[-1])) @ coeffs


def cosine_tail(func, T, freq, cfg):
    """int_T^inf cos(freq t) func(t) dt (QAWF for freq > 0)."""
    if freq == 0:
        # t = T / x keeps the mapped integrand on the scale of T
        return _quad(lambda x: func(T / x) * T / (x * x) if x > 0 else 0.0, 0.0, 1.0, cfg)
    return _quad(func, T, np.inf, cfg, weight="cos", wvar=abs(freq))


def convolution_multiplier(P, k, cfg, scale=None):
    """int_R cos(k t) P(t) dt for an even integrable P.

    scale, when given, is the width of a peak of P at 0; [0, T] is then cut at
    scale * 10^j so narrow peaks are resolved.
    """
    k = abs(int(k))
    T = float(cfg.trunc_T)
    f = lambda t: float(P(t))
    edges = [0.0]
    if scale is not None and scale > 0:
        cut = float(scale)
        while cut < T:
            edges.append(cut)
            cut *= 10
    edges.append(T)
    near = near_err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if k == 0:
            v, e = _quad(f, a, b, cfg)
        else:
            v, e = _quad(f, a, b, cfg, weight="cos", wvar=k)
        near += v
        near_err += e
    far, far_err = 0.0, 0.0
    start = T
    if k == 0 and scale is not None and 100 * scale > T:
        # a peak wider than T: walk out geometrically before the infinite piece
        cut = max(T, float(scale))
        while start < 100 * scale:
            v, e = _quad(f, start, max(cut, start * 10), cfg)
            far += v
            far_err += e
            start = max(cut, start * 10)
            cut = start * 10
    v, e = cosine_tail(f, start, k, cfg)
    far += v
    far_err += e
    return IntegralResult(2 * (near + far), 2 * (near_err + far_err), 2 * far_err)


def kernel_mean(kernel, t, lo, hi):
    """Mean of K(t, .) over the interval between lo and hi (either order).

    Straddling intervals are split at 0; short intervals use a 10-point Gauss rule
    and long ones a difference of primitives (or of tails, when away from 0), so
    no branch suffers cancellation.
    """
    t = np.abs(np.asarray(t, float))
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    t, lo, hi = np.broadcast_arrays(t, lo, hi)
    a = np.minimum(lo, hi)
    b = np.maximum(lo, hi)
    length = b - a
    straddle = (a < 0) & (b > 0)
    near = np.minimum(np.abs(a), np.abs(b))
    far = np.maximum(np.abs(a), np.abs(b))
    safe_len = np.where(length > 0, length, 1.0)

    out = np.empty(t.shape)
    short = ~straddle & (length <= 0.5 * np.hypot(t, near))
    if np.any(short):
        xg, wg = _GL10
        mid = 0.5 * (near[short] + far[short])
        half = 0.5 * (far[short] - near[short])
        vals = kernel(t[short][:, None], mid[:, None] + half[:, None] * xg)
        out[short] = 0.5 * (vals @ wg)
    long_ = ~short & ~straddle
    if np.any(long_):
        tl, nl, fl = t[long_], near[long_], far[long_]
        away = nl > tl
        diff = np.where(away, kernel.primitive_tail(tl, nl) - kernel.primitive_tail(tl, fl),
                        kernel.primitive(tl, fl) - kernel.primitive(tl, nl))
        out[long_] = diff / safe_len[long_]
    if np.any(straddle):
        ts = t[straddle]
        out[straddle] = (kernel.primitive(ts, b[straddle]) + kernel.primitive(ts, -a[straddle])) \
            / safe_len[straddle]
    zero = length == 0
    if np.any(zero):
        out[zero] = kernel(t[zero], a[zero])
    return out if out.ndim else float(out)


@lru_cache(maxsize=None)
def _cached_cosine_tail(kernel, T, freq, z2, rel_tol, abs_tol, limit):
    cfg = QuadConfig(rel_tol=rel_tol, abs_tol=abs_tol, max_subdivisions=limit)
    return cosine_tail(lambda t: float(kernel(t, z2)), T, freq, cfg)


def kernel_cosine_tail(kernel, T, freq, cfg, z2=0.0):
    """int_T^inf cos(freq t) K(t, z2) dt, cached per kernel object."""
    return _cached_cosine_tail(kernel, float(T), float(freq), float(z2), cfg.rel_tol, cfg.abs_tol,
                               int(cfg.max_subdivisions))
