"""Periodic nonlocal perimeter P(E) = int_{E cap slab} int_{E^c} K(x - y) dy dx.

Two evaluators:

* panp_grid for pixel sets on [-pi, pi) x [-Y, Y] (periodic in x1, complement outside
  the grid). Pairs of cells interact through W(D, dj), the integral of K against the
  product of two tent functions, so the perimeter is a correlation of cell counts
  with a precomputed table.
* panp_profile for band sets {|z2| < u(z1)}, reduced to a double integral in
  (x1, t = x1 - y1) of

      J = 2 [2 G_inf(t) (u - v)_+ + Psi(t, u + v) - Psi(t, |u - v|)],
      Psi(t, q) = q * int_q^inf K(t, tau) dtau + int_0^q tau K(t, tau) dtau,

  with u = u(x1), v = u(y1). Psi is bounded and increasing in q, so no term cancels.
"""

import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .curvature import Profile, _mode_sums, anmc_points
from .errors import DegenerateSet, InvalidParameter
from .quad import QuadConfig, cosine_eval, graded_rule, kernel_cosine_tail, lattice_g, panel_rule

_IMAGES = 40          # periodic images summed explicitly on each side
_GAUSS_REACH = 64     # Chebyshev cell distance up to which pair weights use tensor Gauss


# --- pixel sets ----------------------------------------------------------------

class GridSet:
    """Boolean cells on [-pi, pi) x [-Y, Y]; occupancy[j, i] is row j (z2), column i (z1)."""

    def __init__(self, occupancy, Y):
        occ = np.asarray(occupancy, bool)
        if occ.ndim != 2:
            raise InvalidParameter("occupancy must be a 2D array (ny, nx)")
        if not Y > 0:
            raise InvalidParameter("Y must be positive")
        self.occupancy = occ
        self.Y = float(Y)

    ny = property(lambda self: self.occupancy.shape[0])
    nx = property(lambda self: self.occupancy.shape[1])
    hx = property(lambda self: 2 * math.pi / self.nx)
    hy = property(lambda self: 2 * self.Y / self.ny)

    @property
    def cell_count(self):
        return int(self.occupancy.sum())

    @property
    def area(self):
        return self.cell_count * self.hx * self.hy

    def x_centers(self):
        return -math.pi + (np.arange(self.nx) + 0.5) * self.hx

    def y_centers(self):
        return -self.Y + (np.arange(self.ny) + 0.5) * self.hy

    def shifted(self, columns):
        return GridSet(np.roll(self.occupancy, columns, axis=1), self.Y)

    def refined(self, factor=2):
        occ = np.repeat(np.repeat(self.occupancy, factor, axis=0), factor, axis=1)
        return GridSet(occ, self.Y)

    def __eq__(self, other):
        return isinstance(other, GridSet) and self.Y == other.Y and np.array_equal(self.occupancy, other.occupancy)

    def __repr__(self):
        return f"GridSet(nx={self.nx}, ny={self.ny}, Y={self.Y}, cells={self.cell_count})"

    # serialization: header line, then one run-length line per row ("0:12 1:5 0:47")
    def to_rle(self):
        out = io.StringIO()
        out.write(f"gridset {self.nx} {self.ny} {self.Y!r}\n")
        for row in self.occupancy:
            runs, start = [], 0
            edges = np.flatnonzero(np.diff(row.astype(np.int8))) + 1
            for stop in list(edges) + [len(row)]:
                runs.append(f"{int(row[start])}:{stop - start}")
                start = stop
            out.write(" ".join(runs) + "\n")
        return out.getvalue()

    @classmethod
    def from_rle(cls, text):
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        tag, nx, ny, Y = lines[0].split()
        if tag != "gridset":
            raise InvalidParameter("not a gridset run-length file")
        nx, ny = int(nx), int(ny)
        occ = np.zeros((ny, nx), bool)
        if len(lines) - 1 != ny:
            raise InvalidParameter(f"expected {ny} rows, found {len(lines) - 1}")
        for j, ln in enumerate(lines[1:]):
            pos = 0
            for run in ln.split():
                val, n = run.split(":")
                occ[j, pos: pos + int(n)] = val == "1"
                pos += int(n)
            if pos != nx:
                raise InvalidParameter(f"row {j} has {pos} cells, expected {nx}")
        return cls(occ, float(Y))

    def to_pgm(self):
        """Binary PGM, occupied cells black, top row = largest z2."""
        img = np.where(self.occupancy[::-1], 0, 255).astype(np.uint8)
        return f"P5\n{self.nx} {self.ny}\n255\n".encode() + img.tobytes()


def rasterize_profile(u, nx, ny, Y):
    """Cells whose centers satisfy |z2| < u(z1)."""
    if not isinstance(u, Profile):
        u = Profile(u)
    g = GridSet(np.zeros((ny, nx), bool), Y)
    occ = np.abs(g.y_centers())[:, None] < u(g.x_centers())[None, :]
    return GridSet(occ, Y)


def rasterize_disk(area, nx, Y=None):
    """One pixel disk per period at the origin: the round(area / h^2) cells nearest to it.

    Square cells; the pixel area matches `area` to within half a cell.
    """
    hx = 2 * math.pi / nx
    radius = math.sqrt(area / math.pi)
    if Y is None:
        Y = hx * math.ceil(radius / hx + 2)
    ny = int(round(2 * Y / hx))
    g = GridSet(np.zeros((ny, nx), bool), Y)
    x, y = g.x_centers(), g.y_centers()
    d2 = (x[None, :] ** 2 + y[:, None] ** 2).ravel()
    k = max(1, int(round(area / (hx * g.hy))))
    # stable sort keeps the choice among equidistant cells deterministic
    keep = np.argsort(d2, kind="stable")[:k]
    occ = np.zeros(d2.size, bool)
    occ[keep] = True
    return GridSet(occ.reshape(ny, nx), Y)


def random_gridset(seed, nx=64, ny=64, Y=math.pi, n_rect=(3, 8)):
    """Union of 3-8 random rectangles, wrapped in z1, clipped to the grid in z2."""
    rng = np.random.default_rng(seed)
    occ = np.zeros((ny, nx), bool)
    for _ in range(int(rng.integers(n_rect[0], n_rect[1] + 1))):
        w = int(rng.integers(1, nx // 2 + 1))
        h = int(rng.integers(1, ny // 2 + 1))
        i0 = int(rng.integers(0, nx))
        j0 = int(rng.integers(0, ny - h + 1))
        cols = (i0 + np.arange(w)) % nx
        occ[j0: j0 + h, cols] = True
    return GridSet(occ, Y)


def _center_block(counts, length):
    """Boolean blocks of the given sizes centered in [0, length); odd surplus goes low."""
    counts = np.asarray(counts)
    start = (length - counts) // 2
    idx = np.arange(length)
    return (idx[None, :] >= start[:, None]) & (idx[None, :] < (start + counts)[:, None])


def rearrange_cylindrical(E):
    """Center every column about z2 = 0, keeping its cell count."""
    return GridSet(_center_block(E.occupancy.sum(axis=0), E.ny).T, E.Y)


def rearrange_periodic_symmetric(E):
    """Center every row about z1 = 0 within the period, keeping its cell count."""
    return GridSet(_center_block(E.occupancy.sum(axis=1), E.nx), E.Y)


# --- perimeter of pixel sets --------------------------------------------------------

@dataclass(frozen=True)
class PanpResult:
    value: float
    near_field_error: float
    far_tail_bound: float

    @property
    def error(self):
        return self.near_field_error + self.far_tail_bound


def _psi(kernel, t, q):
    t = np.abs(np.asarray(t, float))
    q = np.abs(np.asarray(q, float))
    return q * kernel.primitive_tail(t, q) + kernel.first_moment(t, q)


def _near_weight(kernel, D, dj, hx, hy, cfg):
    """W(D, dj) for cells that touch or nearly touch: z2 integral in closed form."""
    c = dj * hy

    def column(z1):
        t = abs(z1)
        if t == 0.0:
            return 0.0
        if dj == 0:
            # twice int_0^h (h - tau) K(t, tau) dtau
            return float(2 * (hy * kernel.primitive(t, hy) - kernel.first_moment(t, hy)))
        return float(-(_psi(kernel, t, c + hy) - 2 * _psi(kernel, t, c) + _psi(kernel, t, c - hy)))

    center = D * hx
    total = err = 0.0
    cuts = sorted({center - hx, center, center + hx} | ({0.0} if abs(D) <= 1 else set()))
    for a, b in zip(cuts[:-1], cuts[1:]):
        v, e = integrate.quad(lambda z: (hx - abs(z - center)) * column(z), a, b,
                              epsabs=0.0, epsrel=min(cfg.rel_tol, 1e-10), limit=200)
        total += v
        err += e
    return total, err


def _tent_rule(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1), 0.5 * w              # [0, 1]
    return np.concatenate([-x, x]), np.concatenate([w * (1 - x), w * (1 - x)])


def _gauss_weights(kernel, D, dj, hx, hy, n):
    sx, wx = _tent_rule(n)
    z1 = (D[:, None, None] + sx[None, :, None]) * hx
    z2 = (dj[:, None, None] + sx[None, None, :]) * hy
    vals = kernel(z1, z2) * wx[None, :, None] * wx[None, None, :]
    return (hx * hy) ** 2 * vals.sum(axis=(1, 2))


@lru_cache(maxsize=32)
def _weight_table(kernel, nx, ny, hx, hy, rel_tol):
    """Periodized pair weights Wper[dj + ny - 1, p] and their error estimates."""
    cfg = QuadConfig(rel_tol=rel_tol)
    dj = np.arange(-(ny - 1), ny)
    p = np.arange(nx)
    h4 = (hx * hy) ** 2
    W = np.zeros((2 * ny - 1, nx))
    err = np.zeros_like(W)
    m_order = kernel.order
    for m in range(-_IMAGES - 1, _IMAGES + 1):
        D = p + m * nx
        z1, z2 = np.meshgrid(D * hx, dj * hy)
        r2 = z1 * z1 + z2 * z2
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            K = kernel(z1, z2)
            if abs(m) <= 2:
                # midpoint plus the tent-variance correction from second differences
                corr = (kernel(z1 + hx, z2) - 2 * K + kernel(z1 - hx, z2)
                        + kernel(z1, z2 + hy) - 2 * K + kernel(z1, z2 - hy)) / 12
                val = h4 * (K + corr)
                e = h4 * np.abs(corr) * (m_order + 2) * (m_order + 3) * (hx * hx + hy * hy) / (12 * r2)
            else:
                val = h4 * K
                e = h4 * K * m_order * (m_order + 2) * (hx * hx + hy * hy) / (12 * r2)
        cheb = np.maximum(np.abs(D)[None, :], np.abs(dj)[:, None])
        near = cheb <= _GAUSS_REACH
        val = np.where(near, 0.0, val)
        e = np.where(near, 0.0, e)
        if np.any(near):
            jj, ii = np.nonzero(near & (cheb >= 3))
            if len(jj):
                g6 = _gauss_weights(kernel, D[ii].astype(float), dj[jj].astype(float), hx, hy, 6)
                g3 = _gauss_weights(kernel, D[ii].astype(float), dj[jj].astype(float), hx, hy, 3)
                val[jj, ii] = g6
                e[jj, ii] = np.abs(g6 - g3)
            jj, ii = np.nonzero(near & (cheb <= 2) & (cheb > 0))
            for j, i in zip(jj, ii):
                v, ve = _near_weight(kernel, int(D[i]), int(dj[j]), hx, hy, cfg)
                val[j, i] = v
                e[j, i] = ve
        W += val
        err += e
    # images beyond the explicit ones: each column's Riemann sum (step 2 pi) replaced by the
    # integral from half a step before its first omitted image, which is second-order accurate
    line = lambda a: integrate.quad(lambda z: float(kernel(z, 0.0)), a, np.inf, epsabs=0.0, epsrel=1e-8)[0]
    right = (nx * (_IMAGES + 1) + p) * hx - math.pi
    left = (nx * (_IMAGES + 2) - p) * hx - math.pi
    tail = h4 * np.array([line(a) + line(b) for a, b in zip(right, left)]) / (2 * math.pi)
    # dropped terms: the f' Euler-Maclaurin term and the z2 offset, both O((2 pi / A)^2)
    A = 2 * math.pi * (_IMAGES + 0.5)
    height = max(2 * math.pi, (ny - 1) * hy)
    tail_err = float(tail.max()) * (m_order + 1) * (m_order + 2) * (math.pi ** 2 / 6 + height ** 2 / 2) / A ** 2
    tail = tail[None, :]
    return W + tail, err, tail_err


@lru_cache(maxsize=4096)
def _outside_primitive(kernel, d, rel_tol):
    """H(d) = int_0^d int_R int_s^inf K(t, tau) dtau dt ds = 2 int_0^inf Psi(t, d) dt."""
    if d == 0.0:
        return 0.0, 0.0
    f = lambda t: float(_psi(kernel, t, d))
    a, ea = integrate.quad(f, 0.0, d, epsabs=0.0, epsrel=rel_tol, limit=200)
    b, eb = integrate.quad(f, d, np.inf, epsabs=0.0, epsrel=rel_tol, limit=200)
    return 2 * (a + b), 2 * (ea + eb)


def _outside_h(kernel, d, rel_tol):
    if kernel.is_homogeneous and d > 0:
        one, err = _outside_primitive(kernel, 1.0, rel_tol)
        s = d ** (1 - kernel.alpha)
        return one * s, err * s
    return _outside_primitive(kernel, float(d), rel_tol)


def _row_outside(kernel, E, rel_tol):
    """Interaction of one cell in each row with the region |z2| > Y."""
    ny, hy, hx = E.ny, E.hy, E.hx
    Hs = [_outside_h(kernel, k * hy, rel_tol) for k in range(ny + 1)]
    Hv = np.array([h for h, _ in Hs])
    He = np.array([e for _, e in Hs])
    j = np.arange(ny)
    top = Hv[ny - j] - Hv[ny - j - 1]
    bottom = Hv[j + 1] - Hv[j]
    return hx * (top + bottom), hx * (He[ny - j] + He[ny - j - 1] + He[j + 1] + He[j])


def _pair_counts(E):
    """N[dj + ny - 1, p] = #{x in E, y in E^c inside the grid, y - x = (p mod nx, dj)}."""
    occ = E.occupancy.astype(float)
    comp = 1.0 - occ
    ny = E.ny
    Fe = np.fft.rfft2(occ, s=(2 * ny, E.nx))
    Fc = np.fft.rfft2(comp, s=(2 * ny, E.nx))
    corr = np.fft.irfft2(np.conj(Fe) * Fc, s=(2 * ny, E.nx))
    corr = np.rint(corr).astype(np.int64)
    return np.concatenate([corr[ny + 1:], corr[:ny]], axis=0)


def panp_grid(kernel, E, cfg=None):
    cfg = cfg or QuadConfig()
    n = E.cell_count
    if n == 0:
        raise DegenerateSet("empty-set: no occupied cell")
    if n == E.nx * E.ny:
        raise DegenerateSet("full-set: no empty cell inside the grid")
    rel = min(cfg.rel_tol, 1e-10)
    W, Werr, tail = _weight_table(kernel, E.nx, E.ny, E.hx, E.hy, rel)
    N = _pair_counts(E)
    out_row, out_err = _row_outside(kernel, E, rel)
    rows = E.occupancy.sum(axis=1)
    value = float(np.sum(N * W) + rows @ out_row)
    near = float(np.sum(N * Werr) + rows @ out_err)
    return PanpResult(value, near, float(np.sum(N) * tail))


# --- perimeter of band profiles ---------------------------------------------------------

def _profile_t_rule(alpha, n, T, rel_tol):
    xg, wg = graded_rule(1.0, alpha, rel_tol, n)
    xo, wo = panel_rule(np.concatenate([np.arange(1.0, T, 1.0), [T]]), n)
    return np.concatenate([xg, xo]), np.concatenate([wg, wo])


def _profile_sum(kernel, u, x, t, w):
    dm, dp, _ = _mode_sums(u.coeffs, None, 1.0, x, t)   # u(x) - u(x - t), u(x) - u(x + t)
    ux = u(x)[:, None]
    tt = np.broadcast_to(t, dm.shape)
    g_inf = kernel.total_primitive(t)[None, :]
    total = 0.0
    for d in (dm, dp):
        J = 2 * (2 * g_inf * np.maximum(d, 0.0) + _psi(kernel, tt, 2 * ux - d) - _psi(kernel, tt, d))
        total = total + J @ w
    return total


@lru_cache(maxsize=256)
def _g_inf_tail(kernel, T):
    v, _ = integrate.quad(lambda t: float(kernel.total_primitive(t)), T, np.inf, epsabs=0.0, epsrel=1e-12)
    return v


def _far_remainder(kernel, u, x, T, n, periods):
    """int over T < |t| < T + 2 pi periods of J minus its leading far-field form.

    Returns the integral per x and the largest |remainder| on the last period.
    """
    edges = T + 2 * math.pi * np.arange(periods + 1)
    t, w = panel_rule(edges, n)
    ux = u(x)[:, None]
    k0 = kernel(t, 0.0)[None, :]
    lead = 8 * ux * kernel.total_primitive(t)[None, :] - 4 * ux * k0 * (u(x[:, None] - t) + u(x[:, None] + t))
    dm, dp, _ = _mode_sums(u.coeffs, None, 1.0, x, t)
    tt = np.broadcast_to(t, dm.shape)
    g_inf = kernel.total_primitive(t)[None, :]
    J = sum(2 * (2 * g_inf * np.maximum(d, 0.0) + _psi(kernel, tt, 2 * ux - d) - _psi(kernel, tt, d))
            for d in (dm, dp))
    rho = J - lead
    last = t > edges[-2]
    return rho @ w, float(np.max(np.abs(rho[:, last])))


def panp_profile(kernel, u, cfg=None, n_x=None):
    """Perimeter of the band of u per period [-pi, pi)."""
    cfg = cfg or QuadConfig()
    if not isinstance(u, Profile):
        u = Profile(u)
    if u.freq != 1.0 or not u.is_even:
        raise InvalidParameter("panp_profile expects an even 2 pi-periodic profile")
    T = float(cfg.trunc_T)
    n_x = n_x or max(32, 8 * (u.N + 1))
    x = -math.pi + 2 * math.pi * np.arange(n_x) / n_x
    # the leading far-field form is exact up to O(t^(-m-1)) for kernels with a kink on the
    # z1 axis (l1) and O(t^(-m-2)) otherwise; the remainder is integrated out to 8 T
    periods = int(math.ceil(7 * T / (2 * math.pi)))
    n_far = u.N // 2 + 8

    def over_x(xs, n, nf):
        t, w = _profile_t_rule(kernel.alpha, n, T, cfg.rel_tol)
        near = _profile_sum(kernel, u, xs, t, w)
        k = np.arange(u.N + 1)
        C = np.array([kernel_cosine_tail(kernel, T, float(kk), cfg)[0] for kk in k])
        far = 8 * u(xs) * (_g_inf_tail(kernel, T) - np.cos(np.outer(xs, k)) @ (u.coeffs * C))
        rem, rho_end = _far_remainder(kernel, u, xs, T, nf, periods)
        return (near + far + rem).mean() * 2 * math.pi, rho_end

    fine, rho_end = over_x(x, 16, n_far)
    coarse_x, _ = over_x(x[::2], 16, n_far)
    coarse_t, _ = over_x(x, 12, n_far - 2)
    near_err = abs(fine - coarse_x) + abs(fine - coarse_t)
    # beyond T_end the remainder decays at least like t^(-m-1)
    T_end = T + 2 * math.pi * periods
    bound = 2 * math.pi * 2 * rho_end * T_end / kernel.order
    return PanpResult(float(fine), float(near_err), float(bound))


# --- checks ---------------------------------------------------------------------------------

def check_g_monotone(kernel, x2_samples, s_points=128, cfg=None):
    """lattice g on (0, pi) per x2: strict decrease or nonincreasing per the kernel's class."""
    from .kernel import classify_g_conditions

    cfg = cfg or QuadConfig()
    if any(x2 == 0 for x2 in x2_samples):
        raise InvalidParameter("x2 samples must be nonzero")
    s = np.pi * (np.arange(s_points) + 0.5) / s_points if np.isscalar(s_points) else np.asarray(s_points, float)
    classes = classify_g_conditions(kernel, list(x2_samples))
    strict = any(classes.status(c) == "pass" for c in ("class1'", "class2'", "class3'"))
    weak = strict or any(classes.status(c) == "pass" for c in ("class1", "class2", "class3"))
    mode = "strict" if strict else ("nonincreasing" if weak else "report-only")
    rows, violations = [], []
    for x2 in x2_samples:
        g = lattice_g(kernel, s, x2, cfg)
        diff = np.diff(g.value)
        tol = g.tail_bound + float(np.max(g.error_estimate))
        rows.append({"x2": float(x2), "max_step": float(diff.max()), "tail_bound": g.tail_bound})
        if mode == "report-only":
            continue
        bad = diff >= 0 if mode == "strict" else diff > tol
        for i in np.flatnonzero(bad):
            violations.append({"x2": float(x2), "s": float(s[i]), "step": float(diff[i]),
                               "beyond_tolerance": bool(diff[i] > tol)})
    return {"kernel": kernel.label, "mode": mode, "samples": rows, "violations": violations,
            "ok": not violations}


def _circle_order(n):
    """Cell positions in the order a centered block of growing size acquires them."""
    order = []
    for k in range(1, n + 1):
        start = (n - k) // 2
        prev = set(range((n - k + 1) // 2, (n - k + 1) // 2 + k - 1))
        order.extend(sorted(set(range(start, start + k)) - prev))
    return np.array(order)


def rearrange_circle(f):
    f = np.asarray(f)
    out = np.empty_like(f)
    out[_circle_order(len(f))] = np.sort(f)[::-1]
    return out


def riesz_circle_check(f, g, h):
    """Both sides of sum f(i) g(i - j) h(j) before and after rearranging f and h.

    Integer inputs give exact sums. g[d] is indexed by the difference mod n.
    """
    f, g, h = (np.asarray(a) for a in (f, g, h))
    n = len(f)
    if not (len(g) == len(h) == n):
        raise InvalidParameter("f, g, h must have the same length")
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    G = g[idx]
    as_int = all(np.issubdtype(a.dtype, np.integer) for a in (f, g, h))
    if as_int:
        G = G.astype(object)
        f, h = f.astype(object), h.astype(object)
    fs, hs = rearrange_circle(f), rearrange_circle(h)
    lhs = f @ G @ h
    rhs = fs @ G @ hs
    return {"lhs": lhs, "rhs": rhs, "ok": bool(lhs <= rhs), "equal": bool(lhs == rhs), "exact": as_int}


def _trapezoid_h(kernel, u, n, cfg):
    x = -math.pi + 2 * math.pi * np.arange(n) / n
    return x, anmc_points(kernel, u, x, cfg)


def first_variation_check(kernel, u, xi, eps, cfg=None, richardson=True, n_x=None):
    """|d/de P(u + e xi) - 2 int xi H(u)| with a central difference (Richardson by default).

    Returns a dict with the derivative estimate, the curvature side and the discrepancy.
    """
    cfg = cfg or QuadConfig()
    u = u if isinstance(u, Profile) else Profile(u)
    xi_c = np.asarray(xi.coeffs if isinstance(xi, Profile) else xi, float)
    N = max(u.N, len(xi_c) - 1)
    uc = np.zeros(N + 1)
    uc[: u.N + 1] = u.coeffs
    xc = np.zeros(N + 1)
    xc[: len(xi_c)] = xi_c
    n_x = n_x or max(32, 8 * (N + 2))

    def central(e):
        plus = panp_profile(kernel, Profile(uc + e * xc), cfg, n_x)
        minus = panp_profile(kernel, Profile(uc - e * xc), cfg, n_x)
        return (plus.value - minus.value) / (2 * e), plus.error + minus.error

    if not np.any(xc):
        return {"derivative": 0.0, "curvature_side": 0.0, "discrepancy": 0.0, "relative": 0.0}
    d1, e1 = central(eps)
    if richardson:
        d2, e2 = central(eps / 2)
        deriv = (4 * d2 - d1) / 3
        fd_err = (4 * e2 / eps + e1 / eps) / 3
    else:
        deriv, fd_err = d1, e1 / eps
    x, H = _trapezoid_h(kernel, Profile(uc), n_x, cfg)
    xi_x = cosine_eval(xc, x)
    rhs = 2 * float(np.mean(xi_x * H)) * 2 * math.pi
    scale = 2 * float(np.mean(np.abs(xi_x) * np.abs(H))) * 2 * math.pi
    disc = abs(deriv - rhs)
    return {"derivative": float(deriv), "curvature_side": rhs, "discrepancy": float(disc),
            "relative": float(disc / scale), "fd_error": float(fd_err)}


def compare_ball_cylinder(kernel, omega, cfg=None, levels=(512, 1024)):
    """Disk of area omega per period (pixel disks refined over `levels`) vs the band of equal area."""
    cfg = cfg or QuadConfig()
    if not 0 < omega < math.pi ** 3:
        raise InvalidParameter("omega must lie in (0, pi^3) so the disk fits in the slab")
    vals = []
    for nx in levels:
        E = rasterize_disk(omega, nx)
        res = panp_grid(kernel, E, cfg)
        vals.append((nx, res, E.area))
    balls = vals[-1][1]
    # refinement change stands in for the pixelation error of the finest level
    ball_err = balls.error + (abs(vals[-1][1].value - vals[-2][1].value) if len(vals) > 1 else float("inf"))
    band = panp_profile(kernel, Profile([omega / (4 * math.pi)]), cfg)
    if balls.value + ball_err < band.value - band.error:
        winner = "balls"
    elif band.value + band.error < balls.value - ball_err:
        winner = "band"
    else:
        winner = "undecided"
    return {"omega": float(omega), "panp_balls": balls.value, "balls_error": float(ball_err),
            "panp_band": band.value, "band_error": band.error, "winner": winner,
            "levels": [{"nx": nx, "value": res.value, "error": res.error, "pixel_area": area}
                       for nx, res, area in vals]}


def monotonicity_suite(kernel, rearrange, seeds, nx=64, ny=64, Y=math.pi, cfg=None):
    """panp_grid before/after a rearrangement on seeded random sets."""
    cfg = cfg or QuadConfig()
    rows = []
    for seed in seeds:
        E = random_gridset(seed, nx, ny, Y)
        if E.cell_count in (0, E.nx * E.ny):
            continue
        before = panp_grid(kernel, E, cfg)
        after = panp_grid(kernel, rearrange(E), cfg)
        margin = after.value - before.value
        err = before.error + after.error
        rows.append({"seed": seed, "panp_before": before.value, "panp_after": after.value,
                     "margin": margin, "error": err, "violation": margin > err})
    return rows


def suite_csv(rows):
    lines = ["seed,panp_before,panp_after,margin,error"]
    lines += [f"{r['seed']},{r['panp_before']!r},{r['panp_after']!r},{r['margin']!r},{r['error']!r}" for r in rows]
    return "\n".join(lines) + "\n"
