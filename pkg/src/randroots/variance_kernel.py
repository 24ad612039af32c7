"""Variance function f_n(x) = sum_k c_k^2 x^k and its relatives.

Every sum is evaluated directly: terms are formed in log space, the largest
one is factored out, and the rest are accumulated with Neumaier
compensation.  The density code never sees f itself, only the normalized
weights w_k = c_k^2 x^k / f_n(x), whose first two moments in k give
x f'/f and the log-variance combination g' + x g''.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._numerics import signed_binom_logs, signed_log_sum
from .coeff_profiles import (CoefficientProfile, GeneralizedPolynomial, coeff_sequence,
                             generalized_form)


class KernelError(ValueError):
    pass


@njit(cache=True)
def _neumaier_add(s, c, v):
    t = s + v
    if abs(s) >= abs(v):
        c += (s - t) + v
    else:
        c += (v - t) + s
    return t, c


@njit(cache=True)
def _point_stats(lc2, lx):
    """Weighted moments of k under w_k = c_k^2 x^k / f(x) at one x = exp(lx).

    Exponents are measured from the dominant index k* as
    (lc2_k - lc2_k*) + (k - k*) lx, so no term carries the huge k log x.
    Returns (k*, log S0, D, U, V, r2, logf) where S0 = sum_k exp(exponent),
    D = E_w[k] - k*, U = D / x, V = Var_w[k] / x = g' + x g'' and
    r2 = f''/f.  Every sum has nonnegative terms except D and U, which are
    sums of terms sharing the sign of k - k*.
    """
    n1 = lc2.shape[0]
    if lx == -np.inf:
        j = 0
        while lc2[j] == -np.inf:
            j += 1
        v = np.exp(lc2[j + 1] - lc2[j]) if j + 1 < n1 else 0.0
        r2 = 2.0 * np.exp(lc2[2] - lc2[0]) if (j == 0 and n1 > 2) else (0.0 if j == 0 else np.inf)
        u = np.exp(lc2[1] - lc2[0]) if (j == 0 and n1 > 1) else 0.0
        logf = lc2[0] if j == 0 else -np.inf
        return j, 0.0, 0.0, u, v, r2, logf
    ks = 0
    big = -np.inf
    for k in range(n1):
        a = lc2[k] + (k * lx if k > 0 else 0.0)
        if a > big:
            big = a
            ks = k
    base = lc2[ks]
    s = 0.0
    c = 0.0
    for k in range(n1):
        if lc2[k] == -np.inf:
            continue
        s, c = _neumaier_add(s, c, np.exp(lc2[k] - base + (k - ks) * lx))
    logs = np.log(s + c)
    # U = D/x = sum_{k != k*} (k - k*) w_k / x
    u = 0.0
    uc = 0.0
    r2 = 0.0
    r2c = 0.0
    for k in range(n1):
        if lc2[k] == -np.inf:
            continue
        lw = lc2[k] - base + (k - ks) * lx - logs
        if k != ks:
            u, uc = _neumaier_add(u, uc, (k - ks) * np.exp(lw - lx))
        if k >= 2:
            r2, r2c = _neumaier_add(r2, r2c, k * (k - 1) * np.exp(lw - 2.0 * lx))
    u += uc
    r2 += r2c
    d = np.sign(u) * np.exp(lx + np.log(abs(u))) if u != 0.0 else 0.0
    v = 0.0
    vc = 0.0
    for k in range(n1):
        if lc2[k] == -np.inf or k == ks:
            continue
        lw = lc2[k] - base + (k - ks) * lx - logs
        dk = (k - ks) - d
        v, vc = _neumaier_add(v, vc, np.exp(lw - lx) * dk * dk)
    # the k* term: w_k* D^2 / x = w_k* D U (D and U share a sign)
    v += vc + np.exp(-logs) * d * u
    logf = base + ks * lx + logs
    return ks, logs, d, u, v, r2, logf


@njit(cache=True)
def kernel_stats(lc2, logx):
    """Per x = exp(logx): (log f, E_w[k], Var_w[k] / x, f'/f, f''/f).

    Var_w[k]/x equals g'(x) + x g''(x) with g = log f; it is accumulated as a
    sum of nonnegative terms so no cancellation occurs.
    """
    m = logx.shape[0]
    logf = np.empty(m)
    kbar = np.empty(m)
    vx = np.empty(m)
    r1 = np.empty(m)
    r2 = np.empty(m)
    for i in range(m):
        ks, logs, d, u, v, q2, lf = _point_stats(lc2, logx[i])
        logf[i] = lf
        kbar[i] = ks + d
        vx[i] = v
        r1[i] = (ks * np.exp(-logx[i]) if ks > 0 else 0.0) + u
        r2[i] = q2
    return logf, kbar, vx, r1, r2


TINY_T = 1e-150


@njit(cache=True)
def mean_stats(lc2, e_log, e_sign, t_arr):
    """Normalized Kac-Rice ingredients for a Gaussian polynomial whose mean
    has coefficients e_k.  Per t returns (V, m, eta, R) with everything
    divided by sqrt(P): V = S/P^2, m = E P_n(t)/sqrt(P), R = R/P and
    eta = (m' P - m R)/P^(3/2), the latter summed directly as
    sum_k e_k t^(k-1) (k - E_w[k]) / sqrt(P) to avoid cancellation.
    """
    nt = t_arr.shape[0]
    vx = np.empty(nt)
    mt = np.empty(nt)
    eta = np.empty(nt)
    rp = np.empty(nt)
    ne = e_log.shape[0]
    for i in range(nt):
        t = t_arr[i]
        at = abs(t)
        lt = np.log(at) if at > 0 else -np.inf
        lx = 2.0 * lt
        ks, logs, d, u, v, q2, lf = _point_stats(lc2, lx)
        vx[i] = v
        neg = t < 0
        if at < TINY_T:
            # only k = 0 contributes to m and only k = 1 to m'; below TINY_T the
            # O(t) corrections are under rounding, and dividing by t loses digits
            # once t^k is subnormal
            half = 0.5 * lc2[0]
            mt[i] = e_sign[0] * np.exp(e_log[0] - half) if e_log[0] > -np.inf else 0.0
            eta[i] = e_sign[1] * np.exp(e_log[1] - half) if (ne > 1 and e_log[1] > -np.inf) else 0.0
            rp[i] = 0.0
            continue
        shift = 0.5 * (lc2[ks] + logs)
        s0 = 0.0
        c0 = 0.0
        s1 = 0.0
        c1 = 0.0
        for k in range(ne):
            if e_log[k] == -np.inf:
                continue
            sg = e_sign[k]
            if neg and k % 2 == 1:
                sg = -sg
            term = sg * np.exp(e_log[k] - shift + (k - ks) * lt)
            s0, c0 = _neumaier_add(s0, c0, term)
            s1, c1 = _neumaier_add(s1, c1, term * ((k - ks) - d))
        mt[i] = s0 + c0
        eta[i] = (s1 + c1) / t
        # R/P = E_w[k] / t
        rp[i] = (ks + d) / t
    return vx, mt, eta, rp


def _as_logx(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise KernelError("variance function is evaluated at x = t^2 >= 0")
    with np.errstate(divide="ignore"):
        return np.log(x)


@dataclass(frozen=True)
class LimitingForm:
    """f_inf(x) = g(x) + sum_m alpha_m (1-x)^(-L_m)."""

    h: GeneralizedPolynomial
    head: np.ndarray  # polynomial coefficients of g


class VarianceKernel:
    """Immutable holder of log|c_k|, sign c_k and log c_k^2."""

    def __init__(self, log_abs, sign, limit: LimitingForm | None = None, label: str = "explicit"):
        self.log_abs = np.asarray(log_abs, dtype=float).copy()
        self.sign = np.asarray(sign, dtype=float).copy()
        self.log_abs.setflags(write=False)
        self.sign.setflags(write=False)
        if self.log_abs.ndim != 1 or self.log_abs.shape != self.sign.shape:
            raise KernelError("coefficient arrays must be 1-d and aligned")
        if np.all(self.log_abs == -np.inf):
            raise KernelError("all coefficients are zero")
        self.lc2 = 2.0 * self.log_abs
        self.lc2.setflags(write=False)
        self.limit = limit
        self.label = label

    @classmethod
    def from_profile(cls, profile: CoefficientProfile, n: int) -> "VarianceKernel":
        seq = coeff_sequence(profile, n)
        try:
            h, _, head = generalized_form(profile)
            limit = LimitingForm(h, np.asarray(head, dtype=float))
        except ValueError:
            limit = None
        return cls(seq.log_abs, seq.sign, limit, label=profile.label)

    @classmethod
    def from_values(cls, values) -> "VarianceKernel":
        v = np.asarray(values, dtype=float)
        with np.errstate(divide="ignore"):
            return cls(np.log(np.abs(v)), np.where(v < 0, -1.0, 1.0))

    @property
    def degree(self) -> int:
        return len(self.lc2) - 1

    @property
    def values(self) -> np.ndarray:
        return self.sign * np.exp(self.log_abs)

    def scaled(self, lam: float) -> "VarianceKernel":
        return VarianceKernel(self.log_abs + math.log(abs(lam)), self.sign * np.sign(lam),
                              self.limit, self.label)

    def reciprocal(self) -> "VarianceKernel":
        """Kernel of Q(z) = z^n P(1/z) / c_n (coefficients reversed, divided by c_n)."""
        if self.log_abs[-1] == -np.inf:
            raise KernelError("reciprocal needs c_n != 0")
        return VarianceKernel(self.log_abs[::-1] - self.log_abs[-1], self.sign[::-1] * self.sign[-1],
                              None, f"reciprocal({self.label})")

    # ------------------------------------------------------------ evaluation

    def stats_logx(self, logx):
        logx = np.atleast_1d(np.asarray(logx, dtype=float))
        return kernel_stats(self.lc2, logx)

    def eval_f(self, x):
        """(f_n(x), log f_n(x)); scalar in, scalars out."""
        scalar = np.ndim(x) == 0
        logf = self.stats_logx(_as_logx(x))[0]
        val = np.exp(logf)
        return (float(val[0]), float(logf[0])) if scalar else (val, logf)

    def eval_f_derivs(self, x):
        """(f, f', f'') at x >= 0."""
        scalar = np.ndim(x) == 0
        logf, _, _, r1, r2 = self.stats_logx(_as_logx(x))
        f = np.exp(logf)
        out = (f, f * r1, f * r2)
        return tuple(float(v[0]) for v in out) if scalar else out

    def log_derivs(self, x):
        """(g, g', g'') for g = log f."""
        scalar = np.ndim(x) == 0
        logf, _, _, r1, r2 = self.stats_logx(_as_logx(x))
        out = (logf, r1, r2 - r1 * r1)
        return tuple(float(v[0]) for v in out) if scalar else out

    def log_variance_combination(self, x):
        """g'(x) + x g''(x), evaluated as Var_w[k]/x (nonnegative by construction)."""
        scalar = np.ndim(x) == 0
        v = self.stats_logx(_as_logx(x))[2]
        return float(v[0]) if scalar else v


# ------------------------------------------------------ binomial kernels

def _binom_signed(L, n):
    return signed_binom_logs(L, n)


def _binom_ld(L, n):
    """b_{k,L} for k = 0..n in extended precision (exact zeros for L in 0, -1, ...)."""
    j = np.arange(n, dtype=np.longdouble)
    ratio = (np.longdouble(L) + j) / (j + 1)
    out = np.ones(n + 1, dtype=np.longdouble)
    out[1:] = np.cumprod(ratio)
    return out


def _ld_series(coeffs, x):
    """sum_k coeffs[k] x^k with extended-precision terms and Neumaier summation.

    Alternating sums at x near -1 have terms far larger than the result, so
    the terms themselves must carry extra digits.
    """
    xl = np.longdouble(x)
    pw = np.ones(len(coeffs), dtype=np.longdouble)
    if len(coeffs) > 1:
        pw[1:] = np.cumprod(np.full(len(coeffs) - 1, xl))
    terms = coeffs * pw
    s = np.longdouble(0)
    c = np.longdouble(0)
    for v in terms:
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return float(s + c)


def _series(L, n, x):
    b = _binom_ld(L, n)
    if np.all(np.isfinite(b)):
        return _ld_series(b, x)
    lg, sg = _binom_signed(L, n)
    return _signed_series(lg, sg, x)


def _signed_series(logs, signs, x):
    """sum_k signs[k] exp(logs[k]) x^k for real x (log-space fallback)."""
    x = float(x)
    k = np.arange(len(logs))
    if x == 0.0:
        return float(signs[0] * np.exp(logs[0]))
    lx = math.log(abs(x))
    s = signs * (np.sign(x) ** k)
    lg, sg = signed_log_sum(logs + k * lx, s)
    return float(sg * math.exp(lg)) if sg != 0 else 0.0


def b_coeff(n: int, L: float) -> float:
    lg, sg = _binom_signed(L, n)
    return float(sg[-1] * math.exp(lg[-1])) if sg[-1] != 0 else 0.0


def f_binomial(n: int, L: float, x: float) -> float:
    """f_{n,L}(x) = sum_{k<=n} b_{k,L} x^k by direct summation.

    Within 1e-12 of x = 1 it returns b_{n,L+1} (hockey-stick identity).
    L may be any real here; the recursion cross-checks need L - 1 <= 0.
    """
    if abs(x - 1.0) <= 1e-12:
        return b_coeff(n, L + 1.0)
    return _series(L, n, x)


def f_binomial_recursion(n: int, L: float, x: float) -> float:
    """Right-hand side of f_{n,L} = f_{n,L-1}/(1-x) - b_{n,L} x^{n+1}/(1-x)."""
    if x == 1.0:
        raise KernelError("recursion has a pole at x = 1")
    prev = f_binomial(n, L - 1.0, x)
    tail = b_coeff(n, L) * x ** (n + 1)
    return prev / (1.0 - x) - tail / (1.0 - x)


def _reciprocal_coeffs(n, L, shift_L=None):
    """b_{n-k,L'}/b_{n,L} for k = 0..n (L' = shift_L or L)."""
    b = _binom_ld(L, n)
    if b[-1] == 0:
        raise KernelError(f"b_(n,L) vanishes for L={L}, n={n}")
    num = b if shift_L is None else _binom_ld(shift_L, n)
    return num[::-1] / b[-1]


def f_reciprocal(n: int, L: float, x: float) -> float:
    """f~_{n,L}(x) = x^n f_{n,L}(1/x) / b_{n,L} = sum_k (b_{n-k,L}/b_{n,L}) x^k."""
    if L <= 0 and float(L).is_integer():
        raise KernelError("L must avoid 0, -1, -2, ...")
    return _ld_series(_reciprocal_coeffs(n, L), x)


def f_reciprocal_recursion(n: int, L: float, x: float) -> float:
    """1/(1-x) - x/(1-x) * (L-1)/(L+n-1) * f~_{n,L-1}(x).

    The product (L-1)/(L+n-1) f~_{n,L-1} is summed as
    sum_k (b_{n-k,L-1}/b_{n,L}) x^k so that L = 1 (b_{n,0} = 0) is covered.
    """
    if x == 1.0:
        raise KernelError("recursion has a pole at x = 1")
    prod = _ld_series(_reciprocal_coeffs(n, L, shift_L=L - 1.0), x)
    return 1.0 / (1.0 - x) - x / (1.0 - x) * prod


def eval_f_infinity(h: GeneralizedPolynomial, head, x):
    """(f_inf, f_inf', f_inf'') for f_inf(x) = g(x) + sum alpha_m (1-x)^(-L_m), 0 <= x < 1."""
    x = np.asarray(x, dtype=float)
    if np.any(x >= 1.0) or np.any(x < 0):
        raise KernelError("f_inf is defined on 0 <= x < 1")
    head = np.asarray(head, dtype=float)
    f0 = np.zeros_like(x)
    f1 = np.zeros_like(x)
    f2 = np.zeros_like(x)
    om = 1.0 - x
    for L, a in h.terms:
        base = om ** (-L)
        f0 = f0 + a * base
        f1 = f1 + a * L * base / om
        f2 = f2 + a * L * (L + 1.0) * base / (om * om)
    if head.size:
        p = np.polynomial.Polynomial(head)
        f0 = f0 + p(x)
        f1 = f1 + p.deriv(1)(x)
        f2 = f2 + p.deriv(2)(x)
    if f0.ndim == 0:
        return float(f0), float(f1), float(f2)
    return f0, f1, f2
