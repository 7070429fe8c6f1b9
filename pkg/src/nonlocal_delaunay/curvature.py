"""Nonlocal mean curvature of planar band sets {-u(z1) < z2 < u(z1)}.

At the boundary point (s, u(s)), splitting each vertical line z1 = s - t into its
band and complement parts gives

    H(s) = 2 int_R G(t, u(s) - u(s-t)) dt - 2 int_R [G(t, u(s) + u(s-t)) - G(t, inf)] dt.

The first integral is a principal value. Pairing t with -t turns it into

    2 int_0^inf (d_minus + d_plus) * mean_K(t; -d_plus, d_minus) dt,

with d_minus = u(s) - u(s-t), d_plus = u(s) - u(s+t), which converges absolutely
since d_minus + d_plus = O(t^2). The second integral is rewritten around the straight
band of radius rho = c_0 so that the remaining integrand is a bounded difference.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import InvalidParameter, InvalidProfile, Underdetermined
from .quad import QuadConfig, graded_rule, kernel_cosine_tail, kernel_mean, panel_rule


@dataclass(frozen=True, eq=False)
class Profile:
    """u(x) = sum_k c_k cos(k f x) (+ d_k sin(k f x)), f = freq.

    Profiles are even unless sine coefficients are supplied; the sine part exists so
    that translated profiles can be represented exactly.
    """

    coeffs: np.ndarray
    freq: float = 1.0
    sin_coeffs: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, float)).copy()
        object.__setattr__(self, "coeffs", c)
        if self.sin_coeffs is not None:
            d = np.zeros(len(c))
            given = np.asarray(self.sin_coeffs, float)
            if len(given) > len(c):
                c = np.concatenate([c, np.zeros(len(given) - len(c))])
                object.__setattr__(self, "coeffs", c)
                d = np.zeros(len(c))
            d[: len(given)] = given
            object.__setattr__(self, "sin_coeffs", d)
        if not self.freq > 0:
            raise InvalidParameter("freq must be positive")
        grid = np.linspace(-self.period / 2, self.period / 2, 64 * (self.N + 1) + 1)
        if np.min(self(grid)) <= 0:
            raise InvalidProfile("profile must be strictly positive")

    @property
    def N(self):
        return len(self.coeffs) - 1

    @property
    def period(self):
        return 2 * math.pi / self.freq

    @property
    def is_even(self):
        return self.sin_coeffs is None or not np.any(self.sin_coeffs)

    def _phase(self, x):
        return np.multiply.outer(np.asarray(x, float), self.freq * np.arange(self.N + 1))

    def __call__(self, x):
        ph = self._phase(x)
        val = np.cos(ph) @ self.coeffs
        if self.sin_coeffs is not None:
            val = val + np.sin(ph) @ self.sin_coeffs
        return val

    def slope(self, x):
        ph = self._phase(x)
        k = self.freq * np.arange(self.N + 1)
        val = -np.sin(ph) @ (k * self.coeffs)
        if self.sin_coeffs is not None:
            val = val + np.cos(ph) @ (k * self.sin_coeffs)
        return val

    def shifted(self, c):
        """The profile x -> u(x - c)."""
        k = self.freq * np.arange(self.N + 1)
        d = self.sin_coeffs if self.sin_coeffs is not None else np.zeros(self.N + 1)
        cos_new = self.coeffs * np.cos(k * c) - d * np.sin(k * c)
        sin_new = self.coeffs * np.sin(k * c) + d * np.cos(k * c)
        return Profile(cos_new, self.freq, sin_new)

    def plus_constant(self, delta):
        c = self.coeffs.copy()
        c[0] += delta
        return Profile(c, self.freq, self.sin_coeffs)


def h_straight(kernel, R, cfg=None):
    """Curvature of the straight band |z2| < R: 2 int_R int_{2R}^inf K(t, tau) dtau dt."""
    if not R > 0:
        raise InvalidParameter("R must be positive")
    cfg = cfg or QuadConfig()
    return _h_straight_cached(kernel, float(R), min(cfg.rel_tol, 1e-11), int(cfg.max_subdivisions))


@lru_cache(maxsize=4096)
def _h_straight_cached(kernel, R, rel_tol, limit):
    f = lambda t: float(kernel.primitive_tail(t, 2 * R))
    near, _ = integrate.quad(f, 0.0, 2 * R, epsabs=0.0, epsrel=rel_tol, limit=limit)
    far, _ = integrate.quad(f, 2 * R, np.inf, epsabs=0.0, epsrel=rel_tol, limit=limit)
    return 4.0 * (near + far)


@lru_cache(maxsize=256)
def _t_rule(alpha, n_modes, freq, trunc_T, rel_tol):
    """Nodes/weights on (0, trunc_T]: dyadic grading at 0, then half-period panels."""
    n_inner = max(16, n_modes)
    xg, wg = graded_rule(1.0, alpha, rel_tol, n_inner)
    half_period = math.pi / freq
    multiples = np.arange(half_period, trunc_T, half_period)
    edges = np.concatenate([[1.0], multiples[multiples > 1.0], [trunc_T]])
    xo, wo = panel_rule(edges, max(32, 2 * n_modes))
    return np.concatenate([xg, xo]), np.concatenate([wg, wo])


def _mode_sums(coeffs, sin_coeffs, freq, s, t):
    """Differences of a trigonometric polynomial at s, s - t, s + t without cancellation.

    Returns d_minus = u(s) - u(s-t), d_plus = u(s) - u(s+t) and their sum, each of
    shape (len(s), len(t)). The constant coefficient is never used.
    """
    k = freq * np.arange(1, len(coeffs))
    c = np.asarray(coeffs, float)[1:]
    d = np.asarray(sin_coeffs, float)[1:] if sin_coeffs is not None else np.zeros_like(c)
    S = s[:, None, None] * k
    half = np.sin(t[None, :, None] * k / 2)
    A = np.cos(S) * c + np.sin(S) * d          # even part at s
    B = np.sin(S) * c - np.cos(S) * d          # minus the odd part at s
    ct = np.cos(t[None, :, None] * k / 2)
    # cos(k(s - t)) = cos(ks)cos(kt) + sin(ks)sin(kt), etc., arranged via half angles
    two_half2 = 2 * half * half
    two_sc = 2 * half * ct
    d_minus = np.sum(A * two_half2 - B * two_sc, axis=-1)
    d_plus = np.sum(A * two_half2 + B * two_sc, axis=-1)
    second = np.sum(2 * A * two_half2, axis=-1)
    return d_minus, d_plus, second


def _tail_terms(kernel, u, s, T, rho, cfg):
    """Contribution of t > T with K(t, tau) frozen at tau = 0 (first term) and at tau = 2 rho."""
    k = np.arange(1, u.N + 1)
    c = u.coeffs[1:]
    d = u.sin_coeffs[1:] if u.sin_coeffs is not None else np.zeros_like(c)
    zero0 = kernel_cosine_tail(kernel, T, 0.0, cfg)[0]
    band0 = kernel_cosine_tail(kernel, T, 0.0, cfg, z2=2 * rho)[0]
    zero_k = np.array([kernel_cosine_tail(kernel, T, kk * u.freq, cfg)[0] for kk in k])
    band_k = np.array([kernel_cosine_tail(kernel, T, kk * u.freq, cfg, z2=2 * rho)[0] for kk in k])
    phase = s[:, None] * (u.freq * k)
    modes = np.cos(phase) * c + np.sin(phase) * d
    first = 2 * modes @ (zero0 - zero_k)
    second = 2 * (u(s) - u.coeffs[0]) * band0 + 2 * modes @ band_k
    return first, second


def anmc_points(kernel, u, s, cfg=None):
    """Curvature of the band of u at the boundary points (s_j, u(s_j))."""
    cfg = cfg or QuadConfig()
    if not isinstance(u, Profile):
        u = Profile(u)
    s = np.atleast_1d(np.asarray(s, float))
    rho = float(u.coeffs[0])
    h_rho = h_straight(kernel, rho, cfg)
    if u.N == 0:
        return np.full(s.shape, h_rho)
    T = float(cfg.trunc_T)
    t, w = _t_rule(kernel.alpha, u.N, u.freq, T, cfg.rel_tol)

    out = np.empty(s.shape)
    # chunk over s to bound memory (len(s) x len(t) x N)
    step = max(1, int(1e6 // (len(t) * max(u.N, 1))))
    for lo in range(0, len(s), step):
        sc = s[lo: lo + step]
        d_minus, d_plus, second = _mode_sums(u.coeffs, u.sin_coeffs, u.freq, sc, t)
        tt = np.broadcast_to(t, d_minus.shape)
        pv_part = second * kernel_mean(kernel, tt, -d_plus, d_minus)
        us = u(sc)[:, None]
        back = us - rho + (us - d_minus - rho)     # u(s) + u(s-t) - 2 rho
        fwd = us - rho + (us - d_plus - rho)       # u(s) + u(s+t) - 2 rho
        band_part = back * kernel_mean(kernel, tt, 2 * rho, 2 * rho + back) \
            + fwd * kernel_mean(kernel, tt, 2 * rho, 2 * rho + fwd)
        tail1, tail2 = _tail_terms(kernel, u, sc, T, rho, cfg)
        out[lo: lo + step] = 2 * (pv_part @ w + tail1) - 2 * (band_part @ w + tail2) + h_rho
    return out


def anmc_band(kernel, u, s, cfg=None):
    return float(anmc_points(kernel, u, [s], cfg)[0])


def half_period_grid(u, M):
    return np.linspace(0.0, math.pi / u.freq, M)


def anmc_band_curve(kernel, u, M, cfg=None):
    """H at M equispaced points of [0, half period]; even profiles only need this half."""
    if not isinstance(u, Profile):
        u = Profile(u)
    if M < 2 * u.N + 1:
        raise Underdetermined("M must be at least 2N+1")
    return anmc_points(kernel, u, half_period_grid(u, M), cfg)
