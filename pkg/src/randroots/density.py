"""Densities of real zeros of Gaussian random polynomials and their integrals.

Production densities go through the weighted-moment kernel in
``variance_kernel``; the O(n^2) pairwise sum and the raw Kac-Rice formula
below are independent oracles kept for tests.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, logsumexp

from .coeff_profiles import CoefficientProfile, ProfileError, generalized_form
from .quadrature import QuadResult, integrate
from .variance_kernel import VarianceKernel, eval_f_infinity, mean_stats

METHODS = ("ek_raw", "ek_logvar", "kac_closed", "kacrice_mean", "limiting")

SQRT_PI_2 = math.sqrt(math.pi) / 2.0


class DensityError(ValueError):
    pass


def erf_half(x):
    """int_0^x exp(-s^2) ds, i.e. (sqrt(pi)/2) erf(x); tends to sqrt(pi)/2."""
    return SQRT_PI_2 * erf(x)


# ------------------------------------------------------------ mean zero

def density_ek(kernel: VarianceKernel, t):
    """rho(t) = sqrt(g'(t^2) + t^2 g''(t^2)) / pi with g = log f."""
    t = np.asarray(t, dtype=float)
    v = kernel.log_variance_combination(np.atleast_1d(t) ** 2)
    rho = np.sqrt(np.maximum(v, 0.0)) / math.pi
    return float(rho[0]) if t.ndim == 0 else rho


def density_pairwise(kernel: VarianceKernel, t):
    """Oracle: rho^2 = sum_{k<m} (m-k)^2 c_k^2 c_m^2 t^(2(k+m)-2) / (pi^2 f^2).

    Quadratic in the degree; intended for n <= 512.
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lc2 = np.asarray(kernel.lc2)
    n1 = len(lc2)
    k = np.arange(n1)
    kk, mm = np.triu_indices(n1, 1)
    pair_log = lc2[kk] + lc2[mm] + 2.0 * np.log((mm - kk).astype(float))
    expo = (2 * (kk + mm) - 2).astype(float)
    out = np.empty(t.shape)
    for i, ti in enumerate(t):
        if ti == 0.0:
            # only (k, m) = (0, 1) has a zero power
            num = lc2[0] + lc2[1] if n1 > 1 else -np.inf
            logf = lc2[0]
        else:
            la = math.log(abs(ti))
            num = logsumexp(pair_log + expo * la)
            logf = logsumexp(lc2 + 2.0 * k * la)
        out[i] = math.exp(0.5 * (num - 2.0 * logf)) / math.pi if num > -np.inf else 0.0
    return float(out[0]) if scalar else out


def _phi(z):
    """1/sinh(z)^2 - 1/z^2, accurate for all z (even in z)."""
    z = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    small = z < 0.5
    zs = z[small]
    # 1/sinh^2 z = 1/z^2 - sum_k 2^(2k) B_2k (2k-1) z^(2k-2) / (2k)!
    z2 = zs * zs
    out[small] = (-1.0 / 3 + z2 * (1.0 / 15 + z2 * (-2.0 / 189 + z2 * (1.0 / 675 + z2 * (
        -2.0 / 10395 + z2 * (1382.0 / 58046625 + z2 * (-4.0 / 1403325 + z2 * (
            3617.0 / 10854718875))))))))
    zl = z[~small]
    e = np.exp(-2.0 * zl)
    out[~small] = 4.0 * e / (-np.expm1(-2.0 * zl)) ** 2 - 1.0 / (zl * zl)
    return out


def kac_density_closed(n: int, t):
    """Closed-form density for the Kac polynomial of degree n.

    rho^2 pi^2 = 1/(t^2-1)^2 - (n+1)^2 t^(2n)/(t^(2n+2)-1)^2.  Near |t| = 1
    this is rewritten with a = log|t| as
    (1/(4 t^2)) [phi(a) - (n+1)^2 phi((n+1) a)], phi(z) = 1/sinh^2 z - 1/z^2,
    which has no cancellation; at |t| = 1 it equals n(n+2)/12.
    """
    if n < 1:
        raise DensityError("degree must be >= 1")
    t = np.asarray(t, dtype=float)
    at = np.abs(np.atleast_1d(t))
    out = np.empty(at.shape)
    with np.errstate(divide="ignore"):
        a = np.log(at)
    near = np.abs(a) < 0.35
    an = a[near]
    var = np.empty(at.shape)
    with np.errstate(invalid="ignore"):
        var_near = 0.25 * (_phi(an) - (n + 1) ** 2 * _phi((n + 1) * an)) * np.exp(-2.0 * an)
    at_one = an == 0.0
    var_near[at_one] = n * (n + 2) / 12.0
    var[near] = var_near
    far = ~near
    af = a[far]
    t1 = 1.0 / np.expm1(2.0 * af) ** 2
    # second term with the large power divided out
    m = 2.0 * n + 2.0
    inside = af < 0
    t2 = np.empty(af.shape)
    ai = af[inside]
    with np.errstate(invalid="ignore"):
        t2[inside] = np.where(np.isinf(ai), 0.0,
                              (n + 1) ** 2 * np.exp(2.0 * n * ai) / np.expm1(m * ai) ** 2)
    ao = af[~inside]
    t2[~inside] = (n + 1) ** 2 * np.exp(-(2.0 * n + 4.0) * ao) / np.expm1(-m * ao) ** 2
    var[far] = t1 - t2
    out[:] = np.sqrt(np.maximum(var, 0.0)) / math.pi
    return float(out[0]) if t.ndim == 0 else out


# ----------------------------------------------------------- nonzero mean

@dataclass(frozen=True)
class KacRiceTerms:
    """Gaussian Kac-Rice ingredients at a point t.

    Values are normalized by a positive per-t factor so that P = 1; the
    density formula is invariant under that normalization.  ``log_scale`` is
    log P before normalization.
    """

    t: np.ndarray
    m: np.ndarray
    m_prime: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray
    log_scale: np.ndarray
    eta: np.ndarray  # (m' P - m R) / P, summed without cancellation

    def check(self, tol=1e-10):
        if np.any(self.P <= 0) or np.any(self.Q < -tol * self.P):
            raise DensityError("variance ingredients violate P > 0, Q >= 0")
        if np.any(self.S < -tol * self.P * self.Q):
            raise DensityError("S = PQ - R^2 is negative beyond roundoff")


def _mean_arrays(kernel: VarianceKernel, mean_coeffs):
    e = np.zeros(len(kernel.lc2))
    mc = np.asarray(mean_coeffs, dtype=float)
    if len(mc) > len(e):
        if np.any(mc[len(e):] != 0):
            raise DensityError("mean polynomial degree exceeds the kernel degree")
        mc = mc[: len(e)]
    e[: len(mc)] = mc
    with np.errstate(divide="ignore"):
        return np.log(np.abs(e)), np.where(e < 0, -1.0, 1.0)


def mean_coefficients(kernel: VarianceKernel, mu: float, shift=None):
    """e_k = mu c_k - f_k, the coefficients of E[P_n - f]."""
    e = mu * kernel.values
    if shift is not None:
        f = np.asarray(shift, dtype=float)
        if len(f) > len(e) and np.any(f[len(e):] != 0):
            raise DensityError("deterministic polynomial degree exceeds n")
        e[: min(len(f), len(e))] -= f[: len(e)]
    return e


def kacrice_terms(kernel: VarianceKernel, mean_coeffs, t) -> KacRiceTerms:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    e_log, e_sign = _mean_arrays(kernel, mean_coeffs)
    v, mt, eta, rp = mean_stats(np.asarray(kernel.lc2), e_log, e_sign, t)
    with np.errstate(divide="ignore"):
        logp = kernel.stats_logx(2.0 * np.log(np.abs(t)))[0]
    one = np.ones_like(t)
    return KacRiceTerms(t, mt, eta + mt * rp, one, v + rp * rp, rp, v, logp, eta)


def _kacrice_from_terms(tr: KacRiceTerms):
    v = np.maximum(tr.S, 0.0)
    eta = tr.eta
    aeta = np.abs(eta)
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = np.where(v > 0, eta * eta / v, np.where(aeta > 0, np.inf, 0.0))
        i1 = np.sqrt(v) / math.pi * np.exp(-0.5 * (tr.m ** 2 + quad))
        arg = np.where(v > 0, aeta / np.sqrt(2.0 * v), np.where(aeta > 0, np.inf, 0.0))
    i2 = math.sqrt(2.0) * aeta / math.pi * np.exp(-0.5 * tr.m ** 2) * erf_half(arg)
    return i1 + i2


def kacrice_mean_density(kernel: VarianceKernel, mu: float, t, shift=None):
    """Density of real zeros of sum c_k xi_k t^k - f(t) with xi_k ~ N(mu, 1).

    I1 + I2 of the Kac-Rice decomposition; ``shift`` holds the coefficients
    of the deterministic polynomial f (default 0).
    """
    scalar = np.ndim(t) == 0
    tr = kacrice_terms(kernel, mean_coefficients(kernel, mu, shift), t)
    rho = _kacrice_from_terms(tr)
    return float(rho[0]) if scalar else rho


def kacrice_terms_raw(values, mean_coeffs, t):
    """Oracle: the same ingredients by plain power sums (small n, |t| near 1)."""
    c = np.asarray(values, dtype=float)
    e = np.zeros(len(c))
    mc = np.asarray(mean_coeffs, dtype=float)
    e[: len(mc)] = mc[: len(c)]
    k = np.arange(len(c))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    pw = t[:, None] ** k[None, :]
    dpw = np.zeros_like(pw)
    dpw[:, 1:] = k[None, 1:] * t[:, None] ** (k[None, 1:] - 1)
    P = pw ** 2 @ c ** 2
    Q = dpw ** 2 @ c ** 2
    R = (pw * dpw) @ c ** 2
    m = pw @ e
    mp = dpw @ e
    return m, mp, P, Q, R, P * Q - R * R


def kacrice_density_raw(values, mean_coeffs, t):
    """Oracle: the I1 + I2 integrand written directly in m, m', P, Q, R, S."""
    m, mp, P, Q, R, S = kacrice_terms_raw(values, mean_coeffs, t)
    i1 = np.sqrt(S) / (math.pi * P) * np.exp(-(m * m * Q + mp * mp * P - 2 * m * mp * R) / (2 * S))
    d = np.abs(mp * P - m * R)
    i2 = (math.sqrt(2.0) * d / (math.pi * P ** 1.5) * np.exp(-m * m / (2 * P))
          * erf_half(d / np.sqrt(2.0 * P * S)))
    return i1 + i2


# -------------------------------------------------------------- limiting

def limiting_density(h, head, t):
    """rho_inf(t) from f_inf(x) = g(x) + sum alpha_m (1-x)^(-L_m) at x = t^2, |t| < 1."""
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) >= 1):
        raise DensityError("the limiting density lives on |t| < 1")
    x = np.atleast_1d(t) ** 2
    f0, f1, f2 = eval_f_infinity(h, head, x)
    g1 = f1 / f0
    g2 = f2 / f0 - g1 * g1
    v = g1 + x * g2
    rho = np.sqrt(np.maximum(v, 0.0)) / math.pi
    return float(rho[0]) if t.ndim == 0 else rho


def limiting_density_profile(profile: CoefficientProfile, t):
    h, _, head = generalized_form(profile)
    return limiting_density(h, head, t)


# ------------------------------------------------------------ integrals

def _panel_transforms(a, b, n):
    """Split [a, b] at 0, +-1, +-(1 -+ 1/n) and choose a substitution per panel.

    Panels inside 1 - 1/n use 1 - |t| = e^(-u); panels beyond 1 + 1/n use
    |t| = 1 / (1 - e^(-u)), which also maps an infinite end to u = 0.
    Returns a list of (kind, sign, lo, hi) in the substituted variable.
    """
    inner = 1.0 - 1.0 / n
    outer = 1.0 + 1.0 / n
    cuts = [0.0, 1.0, -1.0, inner, -inner, outer, -outer]
    edges = sorted({a, b, *[c for c in cuts if a < c < b]})
    panels = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo == hi:
            continue
        s = 1.0 if hi > 0 or (hi == 0 and lo >= 0) else -1.0
        if lo < 0 < hi:
            raise AssertionError("0 is always a cut")
        alo, ahi = sorted((abs(lo), abs(hi)))
        if ahi <= inner and inner > 0:
            panels.append(("inner", s, -math.log1p(-alo), -math.log1p(-ahi)))
        elif alo >= outer:
            u_hi = -math.log1p(-1.0 / alo)
            u_lo = 0.0 if math.isinf(ahi) else -math.log1p(-1.0 / ahi)
            panels.append(("outer", s, u_lo, u_hi))
        else:
            if math.isinf(ahi):
                raise AssertionError("infinite panel must be an outer panel")
            panels.append(("plain", s, alo, ahi))
    return panels


def integrate_density(rho, a=-math.inf, b=math.inf, n=1, rtol=1e-9, max_depth=60) -> QuadResult:
    """Integral of a vectorized density over [a, b] with near-unit-circle handling."""
    a = float(a)
    b = float(b)
    if b < a:
        raise DensityError("interval must satisfy a <= b")
    total = 0.0
    err = 0.0
    ok = True
    evals = 0
    parts = []
    for kind, s, lo, hi in _panel_transforms(a, b, max(int(n), 1)):
        if kind == "inner":
            def f(u, s=s):
                e = np.exp(-u)
                return rho(s * (1.0 - e)) * e
        elif kind == "outer":
            def f(u, s=s):
                e = np.exp(-u)
                om = -np.expm1(-u)
                return rho(s / om) * e / (om * om)
        else:
            def f(u, s=s):
                return rho(s * u)
        parts.append((f, lo, hi))
    # a coarse first pass sets one absolute tolerance shared by all panels
    rough = [integrate(f, lo, hi, rtol=1e-3, max_depth=20) for f, lo, hi in parts]
    scale = sum(abs(r.value) for r in rough)
    for f, lo, hi in parts:
        r = integrate(f, lo, hi, rtol=rtol, atol=rtol * scale / max(len(parts), 1), max_depth=max_depth)
        total += r.value
        err += r.abserr
        ok = ok and r.converged
        evals += r.evaluations
    return QuadResult(total, err, ok, evals)


def density_function(method: str, kernel: VarianceKernel | None = None, mu: float = 0.0,
                     n: int | None = None, profile: CoefficientProfile | None = None, shift=None):
    """Vectorized t -> rho(t) for a named method."""
    if method not in METHODS:
        raise DensityError(f"unknown density method {method!r}")
    if method == "ek_logvar":
        return lambda t: density_ek(kernel, t)
    if method == "ek_raw":
        return lambda t: density_pairwise(kernel, t)
    if method == "kac_closed":
        return lambda t: kac_density_closed(n, t)
    if method == "kacrice_mean":
        return lambda t: kacrice_mean_density(kernel, mu, t, shift)
    h, _, head = generalized_form(profile)
    return lambda t: limiting_density(h, head, t)


@dataclass
class CountResult:
    value: float
    abserr: float
    converged: bool
    method: str
    interval: tuple
    n: int
    profile: str = ""
    mu: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"value": self.value, "abserr": self.abserr, "converged": self.converged,
                "method": self.method, "interval": [self.interval[0], self.interval[1]],
                "n": self.n, "profile": self.profile, "mu": self.mu}


def expected_count(kernel: VarianceKernel, interval=(-math.inf, math.inf), method: str | None = None,
                   mu: float = 0.0, rtol: float = 1e-9, shift=None) -> CountResult:
    """E N_n(a, b) by quadrature of the chosen density (default ek_logvar, or
    kacrice_mean when mu != 0 or a shift is given)."""
    if method is None:
        method = "kacrice_mean" if (mu != 0.0 or shift is not None) else "ek_logvar"
    n = kernel.degree
    if method == "kac_closed":
        rho = density_function(method, n=n)
    else:
        rho = density_function(method, kernel, mu=mu, shift=shift)
    a, b = interval
    r = integrate_density(rho, a, b, n=n, rtol=rtol)
    return CountResult(r.value, r.abserr, r.converged, method, (a, b), n, kernel.label, mu)


def crossing_count(kernel: VarianceKernel, f_coeffs, interval=(-math.inf, math.inf),
                   mu: float = 0.0, rtol: float = 1e-9) -> CountResult:
    """Expected number of intersections of the graph of P_n with a deterministic polynomial f."""
    r = expected_count(kernel, interval, "kacrice_mean", mu=mu, rtol=rtol, shift=f_coeffs)
    r.extra["f"] = [float(v) for v in np.asarray(f_coeffs, dtype=float)]
    return r


def predicted_slope(profile: CoefficientProfile, mu: float = 0.0) -> float:
    """Coefficient of log n in E N_n over the real line."""
    if mu == 0.0:
        if profile.kind == "hyperbolic":
            return (1.0 + math.sqrt(profile.L)) / math.pi
        if profile.kind == "kac_derivative":
            return (1.0 + math.sqrt(2.0 * profile.d + 1.0)) / math.pi
        if profile.kind == "kac":
            return 2.0 / math.pi
        try:
            h, _, _ = generalized_form(profile)
        except (ProfileError, ValueError) as exc:
            raise DensityError(f"no generalized-polynomial form for {profile.label}") from exc
        return (1.0 + math.sqrt(h.degree + 1.0)) / math.pi
    if profile.kind == "kac":
        rho = 0.0
    elif profile.kind == "kac_derivative":
        rho = float(profile.d)
    else:
        rho = profile.growth_exponent
    if rho is None or abs(rho - round(rho)) > 1e-12 or rho < 0:
        raise DensityError("nonzero mean needs an integer growth exponent")
    return (1.0 + math.sqrt(2.0 * round(rho) + 1.0)) / (2.0 * math.pi)


# --------------------------------------------------------------- curves

@dataclass
class DensityCurve:
    t: np.ndarray
    rho: np.ndarray
    method: str
    n: int
    profile: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise DensityError(f"unknown density method {self.method!r}")
        if np.any(self.rho < 0):
            raise DensityError("density must be nonnegative")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "rho", "method", "n"])
        for ti, ri in zip(self.t, self.rho):
            w.writerow([f"{ti:.17g}", f"{ri:.17g}", self.method, self.n])
        return buf.getvalue()


def density_curve(method: str, kernel: VarianceKernel | None, t, mu: float = 0.0,
                  profile: CoefficientProfile | None = None) -> DensityCurve:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n = kernel.degree if kernel is not None else 0
    rho = density_function(method, kernel, mu=mu, n=n, profile=profile)(t)
    label = kernel.label if kernel is not None else (profile.label if profile else "")
    return DensityCurve(t, np.asarray(rho, dtype=float), method, n, label)
