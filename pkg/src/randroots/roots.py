"""All complex roots of a realized polynomial, with robust real-root tagging.

Roots come from Aberth-Ehrlich simultaneous iteration (Gauss-Seidel sweep,
per-root freezing), followed by a guarded Newton polish.  Real roots are
confirmed by Newton iteration restricted to the real line, so a conjugate
pair hugging the axis is not mistaken for two real roots.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

DEFAULT_IM_TOL = 1e-9
CLUSTER_TOL = 1e-7
PAIR_TOL = 1e-6


class RootError(ValueError):
    pass


# ------------------------------------------------------------- kernels

@njit(cache=True)
def _ratio(ar, ai, zr, zi):
    """P(z)/P'(z); for |z| > 1 the reversed polynomial is used to avoid overflow."""
    n = ar.shape[0] - 1
    if zr * zr + zi * zi <= 1.0:
        pr = ar[n]
        pi = ai[n]
        dr = 0.0
        di = 0.0
        for k in range(n - 1, -1, -1):
            t = dr * zr - di * zi + pr
            di = dr * zi + di * zr + pi
            dr = t
            t = pr * zr - pi * zi + ar[k]
            pi = pr * zi + pi * zr + ai[k]
            pr = t
        den = dr * dr + di * di
        if den == 0.0:
            return 0.0, 0.0
        return (pr * dr + pi * di) / den, (pi * dr - pr * di) / den
    m = zr * zr + zi * zi
    wr = zr / m
    wi = -zi / m
    qr = ar[0]
    qi = ai[0]
    dr = 0.0
    di = 0.0
    for k in range(1, n + 1):
        t = dr * wr - di * wi + qr
        di = dr * wi + di * wr + qi
        dr = t
        t = qr * wr - qi * wi + ar[k]
        qi = qr * wi + qi * wr + ai[k]
        qr = t
    qq = qr * qr + qi * qi
    if qq == 0.0:
        return 0.0, 0.0
    # P/P' = z / (n - w Q'(w)/Q(w)) with P(z) = z^n Q(1/z)
    xr = dr * wr - di * wi
    xi = dr * wi + di * wr
    ur = (xr * qr + xi * qi) / qq
    ui = (xi * qr - xr * qi) / qq
    dr2 = n - ur
    di2 = -ui
    den = dr2 * dr2 + di2 * di2
    if den == 0.0:
        return 0.0, 0.0
    return (zr * dr2 + zi * di2) / den, (zi * dr2 - zr * di2) / den


@njit(cache=True, fastmath={"reassoc", "contract", "arcp"})
def _aberth(ar, ai, zr, zi, tol, maxiter):
    n = zr.shape[0]
    done = np.zeros(n, dtype=np.bool_)
    it = 0
    nd = 0
    while it < maxiter and nd < n:
        it += 1
        for i in range(n):
            if done[i]:
                continue
            xr = zr[i]
            xi = zi[i]
            rr, ri = _ratio(ar, ai, xr, xi)
            sr = 0.0
            si = 0.0
            for j in range(i):
                dr = xr - zr[j]
                di = xi - zi[j]
                inv = 1.0 / (dr * dr + di * di)
                sr += dr * inv
                si -= di * inv
            for j in range(i + 1, n):
                dr = xr - zr[j]
                di = xi - zi[j]
                inv = 1.0 / (dr * dr + di * di)
                sr += dr * inv
                si -= di * inv
            if not (np.isfinite(sr) and np.isfinite(si)):
                # coincident iterates; restart from other initial points
                return it, False
            # Aberth correction r / (1 - r s)
            tr = 1.0 - (rr * sr - ri * si)
            ti = -(rr * si + ri * sr)
            den = tr * tr + ti * ti
            if den == 0.0:
                cr = rr
                ci = ri
            else:
                cr = (rr * tr + ri * ti) / den
                ci = (ri * tr - rr * ti) / den
            zr[i] = xr - cr
            zi[i] = xi - ci
            if not (np.isfinite(zr[i]) and np.isfinite(zi[i])):
                return it, False
            if cr * cr + ci * ci <= tol * tol * (zr[i] * zr[i] + zi[i] * zi[i]):
                done[i] = True
                nd += 1
    return it, nd == n


@njit(cache=True)
def _residual1(ar, ai, x, y):
    """|P(z)| / sum |a_k||z|^k, both scaled by |z|^-n when |z| > 1."""
    n = ar.shape[0] - 1
    m = x * x + y * y
    if m <= 1.0:
        pr = ar[n]
        pi = ai[n]
        s = math.hypot(ar[n], ai[n])
        az = math.sqrt(m)
        for k in range(n - 1, -1, -1):
            t = pr * x - pi * y + ar[k]
            pi = pr * y + pi * x + ai[k]
            pr = t
            s = s * az + math.hypot(ar[k], ai[k])
    else:
        wx = x / m
        wy = -y / m
        aw = 1.0 / math.sqrt(m)
        pr = ar[0]
        pi = ai[0]
        s = math.hypot(ar[0], ai[0])
        for k in range(1, n + 1):
            t = pr * wx - pi * wy + ar[k]
            pi = pr * wy + pi * wx + ai[k]
            pr = t
            s = s * aw + math.hypot(ar[k], ai[k])
    return math.hypot(pr, pi) / s if s > 0 else 0.0


@njit(cache=True)
def _residuals(ar, ai, zr, zi):
    out = np.empty(zr.shape[0])
    for i in range(zr.shape[0]):
        out[i] = _residual1(ar, ai, zr[i], zi[i])
    return out


@njit(cache=True)
def _real_newton(a, x0, maxiter):
    """Newton on the real line for a real polynomial; returns (x, converged)."""
    n = a.shape[0] - 1
    x = x0
    for _ in range(maxiter):
        p = a[n]
        d = 0.0
        for k in range(n - 1, -1, -1):
            d = d * x + p
            p = p * x + a[k]
        if p == 0.0:
            return x, True
        if d == 0.0 or not np.isfinite(d):
            return x, False
        step = p / d
        x -= step
        if not np.isfinite(x):
            return x0, False
        if abs(step) <= 1e-14 * (1.0 + abs(x)):
            return x, True
    return x, False


@njit(cache=True)
def _polish(ar, ai, zr, zi, steps):
    """Guarded Newton: accept a step only if it lowers |P| and stays well
    inside the gap to the nearest other root."""
    n = zr.shape[0]
    res = _residuals(ar, ai, zr, zi)
    for i in range(n):
        gap2 = np.inf
        for j in range(n):
            if j != i:
                dx = zr[i] - zr[j]
                dy = zi[i] - zi[j]
                g = dx * dx + dy * dy
                if g < gap2:
                    gap2 = g
        gap = math.sqrt(gap2)
        for _ in range(steps):
            rr, ri = _ratio(ar, ai, zr[i], zi[i])
            if rr == 0.0 and ri == 0.0:
                break
            if math.hypot(rr, ri) > 0.1 * gap:
                break
            xr = zr[i] - rr
            xi = zi[i] - ri
            nr = _residual1(ar, ai, xr, xi)
            if nr >= res[i]:
                break
            zr[i] = xr
            zi[i] = xi
            res[i] = nr
    return res


# ------------------------------------------------------------- samples

@dataclass
class RootSample:
    """Roots of one realized polynomial.

    ``roots`` has effective_degree entries (multiplicity included);
    ``is_real`` tags real roots (their imaginary part is set to 0) and
    ``partner`` holds the index of the conjugate partner, -1 for real roots.
    """

    coeffs: np.ndarray
    roots: np.ndarray
    residuals: np.ndarray
    effective_degree: int
    is_real: np.ndarray
    partner: np.ndarray
    degenerate: bool = False
    reason: str = ""
    iterations: int = 0
    seed_path: tuple = ()
    classified: bool = False

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def real_roots(self) -> np.ndarray:
        return np.sort(self.roots[self.is_real].real)

    @property
    def n_real(self) -> int:
        return int(np.count_nonzero(self.is_real))

    @property
    def n_pairs(self) -> int:
        return int(np.count_nonzero(~self.is_real)) // 2

    def to_rows(self):
        """(re, im, is_real, residual) rows for a debugging dump."""
        return [(float(z.real), float(z.imag), bool(r), float(e))
                for z, r, e in zip(self.roots, self.is_real, self.residuals)]


def trim(coeffs):
    """Drop zero leading coefficients; returns the trimmed array."""
    a = np.asarray(coeffs)
    nz = np.flatnonzero(a != 0)
    if nz.size == 0:
        raise RootError("the zero polynomial has no finite root set")
    return a[: nz[-1] + 1]


def _initial_points(a, attempt, seed_path):
    m = len(a) - 1
    r = (abs(a[0]) / abs(a[-1])) ** (1.0 / m)
    if attempt == 0:
        offset, rad = 0.4, 1.0
    else:
        # deterministic jitter from the sample's path and the attempt number
        ss = np.random.SeedSequence(0x5EED, spawn_key=tuple(seed_path) + (attempt,))
        u = np.random.Generator(np.random.Philox(ss)).random(2)
        offset, rad = 2.0 * math.pi * u[0], 0.5 + u[1]
    ang = 2.0 * math.pi * np.arange(m) / m + offset
    return r * rad * np.cos(ang), r * rad * np.sin(ang)


def _solve_core(a, tol, maxiter, restarts, seed_path):
    """Aberth solve of a polynomial with a_0 != 0 and a_m != 0."""
    m = len(a) - 1
    ar = np.ascontiguousarray(a.real, dtype=float)
    ai = np.ascontiguousarray(a.imag if np.iscomplexobj(a) else np.zeros(m + 1), dtype=float)
    if m == 1:
        z = -a[0] / a[1]
        zr = np.array([complex(z).real])
        zi = np.array([complex(z).imag])
        return zr, zi, _residuals(ar, ai, zr, zi), 0, True
    total = 0
    for attempt in range(restarts + 1):
        zr, zi = _initial_points(a, attempt, seed_path)
        it, ok = _aberth(ar, ai, zr, zi, tol, maxiter)
        total += it
        if ok:
            res = _polish(ar, ai, zr, zi, 3)
            return zr, zi, res, total, True
    return zr, zi, _residuals(ar, ai, zr, zi), total, False


def find_roots(coeffs, tol=1e-13, maxiter=500, restarts=3, seed_path=(), classify=True,
               t_im_tol=DEFAULT_IM_TOL) -> RootSample:
    """Solve sum_k coeffs[k] z^k = 0; classify real roots for real coefficients."""
    a = np.asarray(coeffs)
    if not (np.issubdtype(a.dtype, np.floating) or np.issubdtype(a.dtype, np.complexfloating)):
        a = a.astype(float)
    if not np.all(np.isfinite(a)):
        raise RootError("coefficients must be finite")
    a = trim(a)
    eff = len(a) - 1
    low = int(np.flatnonzero(a != 0)[0])
    core = a[low:]
    roots = np.zeros(eff, dtype=complex)
    residuals = np.zeros(eff)
    it = 0
    ok = True
    if len(core) > 1:
        zr, zi, res, it, ok = _solve_core(core, tol, maxiter, restarts, seed_path)
        roots[low:] = zr + 1j * zi
        residuals[low:] = res
    sample = RootSample(np.asarray(coeffs), roots, residuals, eff, np.zeros(eff, dtype=bool),
                        np.full(eff, -1), iterations=it, seed_path=tuple(seed_path))
    if not ok:
        sample.degenerate = True
        sample.reason = "no convergence after restarts"
        return sample
    if classify and not np.iscomplexobj(a):
        classify_real(sample, t_im_tol)
    return sample


# ------------------------------------------------------ classification

def classify_real(sample: RootSample, t_im_tol=DEFAULT_IM_TOL) -> RootSample:
    """Tag real roots and conjugate pairs in place.

    Step 1: |Im z| <= tol (1 + |z|) and real-line Newton from Re z lands
    within the same tolerance.  Step 2: greedy conjugate matching of the
    rest.  Step 3: matched pairs within CLUSTER_TOL of the axis are a
    multiple real root.  Leftovers get one more real-Newton chance with the
    cluster tolerance; anything still unmatched flags the sample.
    """
    a = trim(sample.coeffs).astype(float)
    z = sample.roots
    m = len(z)
    is_real = np.zeros(m, dtype=bool)
    partner = np.full(m, -1)
    scale = 1.0 + np.abs(z)

    rev = np.ascontiguousarray(a[::-1])

    def confirm(i, tol):
        x0 = float(z[i].real)
        if abs(x0) > 1.0:
            # Newton on the reversed polynomial at 1/x keeps Horner in range
            w, conv = _real_newton(rev, 1.0 / x0, 60)
            x = 1.0 / w if w != 0 else np.inf
        else:
            x, conv = _real_newton(a, x0, 60)
        return conv and abs(x - x0) <= tol * scale[i], x

    for i in range(m):
        if abs(z[i].imag) <= t_im_tol * scale[i]:
            good, x = confirm(i, t_im_tol)
            if good:
                is_real[i] = True
                z[i] = complex(z[i].real, 0.0)
    rest = [i for i in range(m) if not is_real[i]]
    upper = np.array([i for i in rest if z[i].imag > 0], dtype=int)
    lower = np.array([i for i in rest if z[i].imag <= 0], dtype=int)
    cand = []
    if upper.size and lower.size:
        dist = np.abs(z[upper][:, None] - np.conj(z[lower])[None, :])
        ui, li = np.nonzero(dist <= PAIR_TOL * scale[upper][:, None])
        cand = sorted(zip(dist[ui, li], upper[ui], lower[li]))
    used = set()
    for _, i, j in cand:
        if i in used or j in used:
            continue
        used.update((i, j))
        if abs(z[i].imag) <= CLUSTER_TOL * scale[i] and abs(z[j].imag) <= CLUSTER_TOL * scale[j]:
            c = 0.5 * (z[i].real + z[j].real)
            z[i] = z[j] = complex(c, 0.0)
            is_real[i] = is_real[j] = True
        else:
            partner[i] = j
            partner[j] = i
    leftover = [i for i in rest if i not in used]
    for i in leftover:
        if abs(z[i].imag) <= CLUSTER_TOL * scale[i]:
            good, _ = confirm(i, CLUSTER_TOL)
            if good:
                is_real[i] = True
                z[i] = complex(z[i].real, 0.0)
                continue
        sample.degenerate = True
        sample.reason = "unmatched non-real root"
    sample.is_real = is_real
    sample.partner = partner
    sample.classified = True
    return sample


# ------------------------------------------------------------- counting

@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if self.b < self.a:
            raise RootError("interval needs a <= b")


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float


@dataclass(frozen=True)
class Annulus:
    center: complex
    inner: float
    outer: float


EDGE_TOL = 1e-12


def count_in_set(sample: RootSample, region) -> int:
    """Roots in a closed set, with multiplicity; near-boundary ties count as inside."""
    z = sample.roots
    if isinstance(region, Interval):
        x = z[sample.is_real].real
        lo = region.a - EDGE_TOL * (1.0 + abs(region.a)) if np.isfinite(region.a) else -np.inf
        hi = region.b + EDGE_TOL * (1.0 + abs(region.b)) if np.isfinite(region.b) else np.inf
        return int(np.count_nonzero((x >= lo) & (x <= hi)))
    if isinstance(region, Disk):
        d = np.abs(z - region.center)
        return int(np.count_nonzero(d <= region.radius + EDGE_TOL * (1.0 + region.radius)))
    if isinstance(region, Annulus):
        d = np.abs(z - region.center)
        lo = region.inner - EDGE_TOL * (1.0 + region.inner)
        hi = region.outer + EDGE_TOL * (1.0 + region.outer)
        return int(np.count_nonzero((d >= lo) & (d <= hi)))
    raise RootError(f"unsupported region {region!r}")


def reciprocal_transform(coeffs) -> np.ndarray:
    """Coefficients of Q(z) = z^n P(1/z) / a_n (reversed, divided by a_n)."""
    a = np.asarray(coeffs)
    if a[-1] == 0:
        warnings.warn("leading coefficient is zero; transforming the trimmed polynomial", stacklevel=2)
        a = trim(a)
    return a[::-1] / a[-1]


def poly_eval(coeffs, z):
    """Horner evaluation of sum_k coeffs[k] z^k (vectorized in z)."""
    z = np.asarray(z)
    acc = np.zeros_like(z, dtype=np.result_type(z, np.asarray(coeffs), float))
    for c in np.asarray(coeffs)[::-1]:
        acc = acc * z + c
    return acc


def jensen_root_bound(coeffs, center, s, R, points=64) -> float:
    """(log M - log|P(z)|) / log(R/s), M the max of |P| over ``points`` points
    on |w - z| = R.  Bounds the number of roots in the closed disk B(z, s)."""
    if not 0 < s < R:
        raise RootError("need 0 < s < R")
    a = np.asarray(coeffs)
    pz = abs(poly_eval(a, complex(center)))
    if pz <= 1e-300 or pz <= 1e-14 * float(np.sum(np.abs(a) * abs(complex(center)) ** np.arange(len(a)))):
        raise RootError("P vanishes at the center; the bound is undefined")
    w = complex(center) + R * np.exp(2j * math.pi * np.arange(points) / points)
    big = float(np.max(np.abs(poly_eval(a, w))))
    return (math.log(big) - math.log(pz)) / math.log(R / s)


# ------------------------------------------------- certified disk counts

EPS = np.finfo(float).eps


@njit(cache=True)
def taylor_shift(a, x):
    """Coefficients T_j of P(x + w) = sum_j T_j w^j (real x, repeated synthetic division)."""
    n = a.shape[0] - 1
    b = a.copy()
    for j in range(n):
        for k in range(n - 1, j - 1, -1):
            b[k] += x * b[k + 1]
    return b


@njit(cache=True)
def _winding(t, r, m):
    """Values of sum_j t_j (r e^(i theta))^j at m equispaced angles, and the
    winding number of that closed curve around 0."""
    n = t.shape[0] - 1
    vr = np.empty(m)
    vi = np.empty(m)
    for q in range(m):
        th = 2.0 * np.pi * q / m
        zr = r * np.cos(th)
        zi = r * np.sin(th)
        pr = t[n]
        pi = 0.0
        for k in range(n - 1, -1, -1):
            tmp = pr * zr - pi * zi + t[k]
            pi = pr * zi + pi * zr
            pr = tmp
        vr[q] = pr
        vi[q] = pi
    total = 0.0
    for q in range(m):
        q2 = (q + 1) % m
        # angle of v[q2] / v[q]
        cr = vr[q2] * vr[q] + vi[q2] * vi[q]
        ci = vi[q2] * vr[q] - vr[q2] * vi[q]
        total += np.arctan2(ci, cr)
    mn = np.inf
    for q in range(m):
        h = np.hypot(vr[q], vi[q])
        if h < mn:
            mn = h
    return int(np.round(total / (2.0 * np.pi))), mn


def disk_counts_certified(coeffs, center: float, radii, max_points=4096):
    """Numbers of roots of a real polynomial in the closed disks B(center, r).

    Returns (counts, methods).  Taylor coefficients T_j at the (real) center
    are computed once; with A_j = |T_j| r^j and E a rounding bound on
    sum_j |delta T_j| r^j, Pellet's test (A_k > sum_{j != k} A_j + E gives
    exactly k roots) is tried first, then the argument principle with a
    derivative bound that keeps every sampled arc's change in P below |P|.
    If neither certifies, the polynomial is solved outright (once).
    """
    a = trim(np.asarray(coeffs, dtype=float))
    n = len(a) - 1
    radii = [float(r) for r in radii]
    if n == 0:
        return [0] * len(radii), ["constant"] * len(radii)
    x = float(center)
    t = taylor_shift(a.astype(float), x)
    j = np.arange(n + 1)
    counts, methods = [], []
    solved = None
    for r in radii:
        with np.errstate(over="ignore", under="ignore"):
            amp = np.abs(t) * r ** j
        err = 4.0 * (n + 1) * EPS * float(np.sum(np.abs(a) * (abs(x) + r) ** j))
        total = float(np.sum(amp))
        found = None
        for k in range(min(n, 8) + 1):
            if amp[k] > total - amp[k] + err:
                found = (k, "pellet")
                break
        if found is None:
            dbound = float(np.sum(j * amp)) + n * err
            m = 64
            while m <= max_points:
                w, mn = _winding(t, r, m)
                # |P(theta) - P(theta_q)| <= dbound * pi / m on each half arc
                if mn - err > dbound * math.pi / m:
                    found = (w, "winding")
                    break
                m *= 2
        if found is None:
            if solved is None:
                solved = find_roots(a)
                if solved.degenerate:
                    raise RootError("fallback solve did not converge")
            found = (count_in_set(solved, Disk(complex(x), r)), "solve")
        counts.append(found[0])
        methods.append(found[1])
    return counts, methods


def count_in_disk_certified(coeffs, center: float, radius: float, max_points=4096):
    """Single-radius form of disk_counts_certified: (count, method)."""
    c, m = disk_counts_certified(coeffs, center, [radius], max_points)
    return c[0], m[0]
