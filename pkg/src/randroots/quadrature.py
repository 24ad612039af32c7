"""Adaptive Gauss-Kronrod (7/15) quadrature with vectorized panel refinement.

All active panels are evaluated in a single call of the integrand, and the
refinement decision depends only on panel order, so results never depend on
how the work is scheduled.
"""

from __future__ import annotations

from collections import namedtuple

import numpy as np

# Kronrod abscissae on [0, 1]; odd positions (1, 3, 5, 7) are the Gauss points
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])

QuadResult = namedtuple("QuadResult", "value abserr converged evaluations")


def gk15(func, lo, hi):
    """One GK15 pass over each panel [lo_i, hi_i]: returns (kronrod, |kronrod - gauss|)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * NODES[None, :]
    y = np.asarray(func(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(y)):
        raise FloatingPointError("integrand returned a non-finite value")
    k = half * (y @ KRONROD_WEIGHTS)
    g = half * (y @ GAUSS_WEIGHTS)
    return k, np.abs(k - g)


def integrate(func, a, b, points=(), rtol=1e-9, atol=0.0, max_depth=60, max_panels=200_000):
    """Adaptive integral of a vectorized func over the finite interval [a, b].

    ``points`` are interior breakpoints.  Each round every panel whose error
    exceeds its even share of the remaining budget is bisected.  A panel that
    reaches ``max_depth`` bisections is frozen and its error still counts; the
    result then reports converged=False instead of raising.
    """
    a = float(a)
    b = float(b)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("integrate() needs finite limits; map infinite ranges first")
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    if a == b:
        return QuadResult(0.0, 0.0, True, 0)
    edges = np.unique(np.concatenate([[a, b], [p for p in points if a < p < b]]))
    lo, hi = edges[:-1], edges[1:]
    depth = np.zeros(len(lo), dtype=int)
    val, err = gk15(func, lo, hi)
    evals = 15 * len(lo)
    # frozen panels: accepted for good (depth cap)
    done_val = 0.0
    done_err = 0.0
    converged = True
    while True:
        total = done_val + val.sum()
        tol = max(atol, rtol * abs(total))
        total_err = done_err + err.sum()
        if total_err <= tol or len(lo) == 0:
            break
        if len(lo) > max_panels:
            converged = False
            break
        share = max(tol - done_err, 0.0) / len(lo)
        split = err > share
        if not split.any():
            split = err == err.max()
        capped = split & (depth >= max_depth)
        if capped.any():
            converged = False
            done_val += val[capped].sum()
            done_err += err[capped].sum()
            keep = ~capped
            lo, hi, depth, val, err, split = lo[keep], hi[keep], depth[keep], val[keep], err[keep], split[keep]
            if not split.any():
                continue
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        nv, ne = gk15(func, new_lo, new_hi)
        evals += 15 * len(new_lo)
        nd = np.concatenate([depth[split], depth[split]]) + 1
        keep = ~split
        # merge in panel order so the floating-point sum is schedule independent
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        depth = np.concatenate([depth[keep], nd])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
        order = np.argsort(lo, kind="stable")
        lo, hi, depth, val, err = lo[order], hi[order], depth[order], val[order], err[order]
    value = done_val + float(np.sum(val))
    abserr = done_err + float(np.sum(err))
    return QuadResult(sign * value, abserr, converged, evals)


def integrate_mapped(func, a, b, points=(), **kw):
    """Integral over [a, b] with infinite limits allowed (t = u / (1 - |u|))."""
    a = float(a)
    b = float(b)
    if np.isfinite(a) and np.isfinite(b):
        return integrate(func, a, b, points, **kw)

    def to_u(t):
        if t == np.inf:
            return 1.0
        if t == -np.inf:
            return -1.0
        return t / (1.0 + abs(t))

    def g(u):
        au = np.abs(u)
        t = u / (1.0 - au)
        return func(t) / (1.0 - au) ** 2

    upts = [to_u(p) for p in points]
    return integrate(g, to_u(a), to_u(b), upts, **kw)
