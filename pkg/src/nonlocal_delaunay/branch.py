"""Periodic constant-curvature bands bifurcating from the straight band at R*.

For an amplitude a the profile is w = gamma R* + a (cos + v) with v free of mode 1.
The curvature equation H(w) = h(gamma R*) is divided by 2a and split as

    Phi = Phi_1 - Phi_2,
    Phi_1(s) = int_0^inf (dm + dp) mean_K(t; -a dp, a dm) dt,
    Phi_2(s) = int_R psi mean_K(t; 2 gamma R*, 2 gamma R* + a psi) dt,

where dm, dp are the differences phi(s) - phi(s -+ t) and psi = phi(s) + phi(s - t).
Both integrals converge absolutely and stay meaningful at a = 0, where Phi is the
linearized curvature operator (mu_k on cos k s). Newton iteration in cosine
coefficients solves for (gamma, v); gamma takes the place of the mode-1 unknown.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .curvature import Profile, _mode_sums, _t_rule, anmc_band_curve, anmc_points, h_straight
from .errors import BandCollapse, InvalidParameter, NewtonFailure, NotApplicable
from .quad import QuadConfig, cosine_eval, cosine_project, kernel_cosine_tail, kernel_mean

DEFAULT_NEWTON = {"max_iter": 20, "tol": 1e-10}


def _sup_abs(coeffs):
    n = len(coeffs)
    return float(np.max(np.abs(cosine_eval(coeffs, np.linspace(0, np.pi, 16 * n + 1)))))


def phi_eval(a, gamma, phi_coeffs, s_grid, kernel, R_star, cfg=None):
    cfg = cfg or QuadConfig()
    c = np.atleast_1d(np.asarray(phi_coeffs, float))
    s = np.atleast_1d(np.asarray(s_grid, float))
    rho2 = 2 * gamma * R_star
    if rho2 - 2 * abs(a) * _sup_abs(c) < R_star / 2:
        raise BandCollapse(f"a = {a:g} too large for gamma = {gamma:g}: band width leaves [R*/2, inf)")
    N = len(c) - 1
    T = float(cfg.trunc_T)
    t, wts = _t_rule(kernel.alpha, max(N, 1), 1.0, T, cfg.rel_tol)

    k = np.arange(1, N + 1)
    zero0 = kernel_cosine_tail(kernel, T, 0.0, cfg)[0]
    band0 = kernel_cosine_tail(kernel, T, 0.0, cfg, z2=rho2)[0]
    zero_k = np.array([kernel_cosine_tail(kernel, T, float(kk), cfg)[0] for kk in k])
    band_k = np.array([kernel_cosine_tail(kernel, T, float(kk), cfg, z2=rho2)[0] for kk in k])

    out = np.empty(s.shape)
    step = max(1, int(1e6 // (len(t) * max(N, 1))))
    for lo in range(0, len(s), step):
        sc = s[lo: lo + step]
        dm, dp, second = _mode_sums(c, None, 1.0, sc, t)
        tt = np.broadcast_to(t, dm.shape)
        first = second * kernel_mean(kernel, tt, -a * dp, a * dm)
        ps = cosine_eval(c, sc)
        psi_m = 2 * ps[:, None] - dm
        psi_p = 2 * ps[:, None] - dp
        band = psi_m * kernel_mean(kernel, tt, rho2, rho2 + a * psi_m) \
            + psi_p * kernel_mean(kernel, tt, rho2, rho2 + a * psi_p)
        # beyond T the kernel is frozen at a = 0, which leaves only cosine transforms
        modes = np.cos(np.outer(sc, k)) * c[1:]
        tail1 = 2 * modes @ (zero0 - zero_k)
        tail2 = 2 * (ps + c[0]) * band0 + 2 * modes @ band_k
        out[lo: lo + step] = first @ wts + tail1 - (band @ wts + tail2)
    return out


def _phi_coeffs(x):
    """Unknowns [gamma, c0, c2..cN] -> (gamma, cosine coefficients of cos + v)."""
    x = np.asarray(x, float)
    return x[0], np.concatenate([[x[1], 1.0], x[2:]])


def _residual(x, a, kernel, R_star, N, M, cfg):
    gamma, phi = _phi_coeffs(x)
    s = np.linspace(0.0, np.pi, M)
    return cosine_project(phi_eval(a, gamma, phi, s, kernel, R_star, cfg), N)


def assemble_jacobian(a, gamma, v_coeffs, kernel, R_star, N, M=64, cfg=None, F=None):
    """Forward-difference Jacobian of the projected system and its residual.

    Rows are cosine modes 0..N of Phi; columns are gamma, c0, c2..cN.
    """
    cfg = cfg or QuadConfig()
    x = np.concatenate([[gamma], np.asarray(v_coeffs, float)])
    if len(x) != N + 1:
        raise InvalidParameter("v_coeffs must hold c0, c2..cN")
    if F is None:
        F = _residual(x, a, kernel, R_star, N, M, cfg)
    J = np.empty((N + 1, N + 1))
    for j in range(N + 1):
        h = 1e-6 * (1 + abs(x[j]))
        xp = x.copy()
        xp[j] += h
        J[:, j] = (_residual(xp, a, kernel, R_star, N, M, cfg) - F) / h
    return J, F


@dataclass
class BranchPoint:
    a: float
    gamma: float
    v_coeffs: np.ndarray
    phi_residual: float
    anmc_residual: float = float("nan")
    w0: float = float("nan")
    iterations: int = 0
    jacobian_cond: float = float("nan")

    def phi_coeffs(self):
        return np.concatenate([[self.v_coeffs[0], 1.0], self.v_coeffs[1:]])

    def w_coeffs(self, R_star):
        w = self.a * self.phi_coeffs()
        w[0] += self.gamma * R_star
        return w

    def profile(self, R_star):
        return Profile(self.w_coeffs(R_star))

    def v_sup(self):
        v = np.concatenate([[self.v_coeffs[0], 0.0], self.v_coeffs[1:]])
        return _sup_abs(v)

    def to_dict(self):
        return {"a": self.a, "gamma": self.gamma, "v_coeffs": list(map(float, self.v_coeffs)),
                "phi_residual": self.phi_residual, "anmc_residual": self.anmc_residual, "w0": self.w0,
                "iterations": self.iterations, "jacobian_cond": self.jacobian_cond}


def solve_point(a, init, kernel, R_star, N=16, cfg=None, newton=None, M=64):
    cfg = cfg or QuadConfig()
    opts = {**DEFAULT_NEWTON, **(newton or {})}
    if N < 8:
        raise InvalidParameter("mode cutoff N must be at least 8")
    gamma0, v0 = init
    v = np.zeros(N)
    v0 = np.asarray(v0, float)[:N]
    v[: len(v0)] = v0
    x = np.concatenate([[gamma0], v])

    F = _residual(x, a, kernel, R_star, N, M, cfg)
    norm = float(np.max(np.abs(F)))
    it, cond = 0, float("nan")
    while norm > opts["tol"]:
        if it >= opts["max_iter"]:
            best = BranchPoint(a, float(x[0]), x[1:].copy(), norm, w0=float(x[0]) * R_star, iterations=it,
                               jacobian_cond=cond)
            raise NewtonFailure(f"no convergence at a = {a:g} after {it} iterations (|F| = {norm:.3g})", best)
        J, _ = assemble_jacobian(a, x[0], x[1:], kernel, R_star, N, M, cfg, F=F)
        cond = float(np.linalg.cond(J))
        dx = np.linalg.solve(J, -F)
        # halve the step while it does not reduce the residual
        lam = 1.0
        for _ in range(5):
            try:
                F_new = _residual(x + lam * dx, a, kernel, R_star, N, M, cfg)
            except BandCollapse:
                lam *= 0.5
                continue
            if np.max(np.abs(F_new)) < norm:
                break
            lam *= 0.5
        else:
            best = BranchPoint(a, float(x[0]), x[1:].copy(), norm, w0=float(x[0]) * R_star, iterations=it,
                               jacobian_cond=cond)
            raise NewtonFailure(f"line search failed at a = {a:g} (|F| = {norm:.3g})", best)
        x = x + lam * dx
        F = F_new
        norm = float(np.max(np.abs(F)))
        it += 1
    return BranchPoint(a, float(x[0]), x[1:].copy(), norm, w0=float(x[0]) * R_star, iterations=it,
                       jacobian_cond=cond)


def certify_constant_anmc(point, kernel, R_star, fine_M=256, cfg=None):
    """sup |H(w) - h(gamma R*)| on fine_M points of [0, pi], via the curvature module."""
    cfg = cfg or QuadConfig()
    w = point.profile(R_star)
    H = anmc_band_curve(kernel, w, fine_M, cfg)
    point.anmc_residual = float(np.max(np.abs(H - h_straight(kernel, point.gamma * R_star, cfg))))
    return point.anmc_residual


def rescale_homogeneous(point, R_star, kernel):
    """w~(x) = w(gamma x) / gamma; for homogeneous kernels its curvature is h(R*)."""
    if not kernel.is_homogeneous:
        raise NotApplicable("rescaling needs a homogeneous kernel")
    return Profile(point.w_coeffs(R_star) / point.gamma, freq=point.gamma)


def rescaled_residual(profile, kernel, R_star, M=65, cfg=None):
    cfg = cfg or QuadConfig()
    s = np.linspace(0.0, math.pi / profile.freq, M)
    return float(np.max(np.abs(anmc_points(kernel, profile, s, cfg) - h_straight(kernel, R_star, cfg))))


def mirror_defect(plus, minus, R_star, M=129):
    """max |w_a(s + pi) - w_{-a}(s)|; zero for kernels even in z1."""
    s = np.linspace(0.0, 2 * np.pi, M)
    return float(np.max(np.abs(cosine_eval(plus.w_coeffs(R_star), s + np.pi)
                               - cosine_eval(minus.w_coeffs(R_star), s))))


def halving_envelope(points, factor=1.5):
    """Check that |gamma - 1| and sup|v| shrink along points ordered by halving |a|."""
    gam = [abs(p.gamma - 1.0) for p in points]
    vs = [p.v_sup() for p in points]

    def ok(q):
        return all(q[i + 1] <= factor * q[i] for i in range(len(q) - 1)) and q[-1] <= q[0]

    return {"a": [p.a for p in points], "gamma_dev": gam, "v_sup": vs, "ok": ok(gam) and ok(vs)}


def quadratic_fit(points, R_star):
    """Fit sup|w(a) - (R* + a cos)| = C a^2 and report C and R^2."""
    a = np.array([p.a for p in points])
    dev = np.array([_sup_abs(p.w_coeffs(R_star) - np.array([R_star, p.a] + [0.0] * (len(p.v_coeffs) - 1)))
                    for p in points])
    x = a * a
    C = float(x @ dev / (x @ x))
    ss_res = float(np.sum((dev - C * x) ** 2))
    ss_tot = float(np.sum((dev - dev.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float(ss_res == 0)
    return {"a": a.tolist(), "deviation": dev.tolist(), "C": C, "r2": r2}


@dataclass
class BranchRun:
    kernel_label: str
    R_star: float
    a_grid: list
    points: list
    stats: dict = field(default_factory=dict)
    nu_hat: dict = field(default_factory=dict)

    def to_dict(self):
        return {"kernel": self.kernel_label, "R_star": self.R_star, "a_grid": list(self.a_grid),
                "nu_hat": self.nu_hat, "stats": self.stats, "points": [p.to_dict() for p in self.points]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def profile_csv(self, point, M=129):
        s = np.linspace(-np.pi, np.pi, M)
        w = cosine_eval(point.w_coeffs(self.R_star), s)
        return "s,w\n" + "".join(f"{x!r},{y!r}\n" for x, y in zip(s, w))


def continue_branch(a_grid, kernel, cfg=None, newton=None, N=16, M=64, R_star=None, certify=True,
                    fine_M=None, max_halvings=3):
    """March outward from a = 0 along both signs of a, predictor = previous point."""
    from .spectrum import find_rstar

    cfg = cfg or QuadConfig()
    if R_star is None:
        R_star = find_rstar(kernel, cfg)
    fine_M = fine_M or 4 * M
    grid = sorted({float(a) for a in a_grid} | {0.0})
    origin = solve_point(0.0, (1.0, np.zeros(N)), kernel, R_star, N, cfg, newton, M)
    points = [origin]
    stats = {"iterations": {}, "jacobian_cond": {}, "failures": []}
    nu_hat = {}

    for sign, targets in (("+", [a for a in grid if a > 0]), ("-", sorted((a for a in grid if a < 0), reverse=True))):
        prev = origin
        queue = list(targets)
        halvings = 0
        while queue:
            target = queue[0]
            try:
                p = solve_point(target, (prev.gamma, prev.v_coeffs), kernel, R_star, N, cfg, newton, M)
            except (NewtonFailure, BandCollapse) as exc:
                stats["failures"].append({"a": target, "error": exc.kind})
                if halvings >= max_halvings:
                    break
                halvings += 1
                queue.insert(0, 0.5 * (prev.a + target))
                continue
            queue.pop(0)
            halvings = 0
            points.append(p)
            prev = p
        nu_hat[sign] = abs(prev.a)

    points.sort(key=lambda p: p.a)
    for p in points:
        stats["iterations"][repr(p.a)] = p.iterations
        stats["jacobian_cond"][repr(p.a)] = p.jacobian_cond
        if certify:
            certify_constant_anmc(p, kernel, R_star, fine_M, cfg)
    return BranchRun(kernel.label, float(R_star), grid, points, stats, nu_hat)
