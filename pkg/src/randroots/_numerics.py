"""Low-level compensated summation kernels shared by the evaluators."""

import numpy as np
from numba import njit


@njit(cache=True)
def compensated_cumsum(terms):
    """Running sums with Neumaier compensation."""
    out = np.empty(terms.shape[0])
    s = 0.0
    c = 0.0
    for i in range(terms.shape[0]):
        x = terms[i]
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
        out[i] = s + c
    return out


@njit(cache=True)
def compensated_sum(terms):
    s = 0.0
    c = 0.0
    for i in range(terms.shape[0]):
        x = terms[i]
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c


@njit(cache=True)
def signed_log_sum(logs, signs):
    """Return (log|S|, sign S) for S = sum signs[k] * exp(logs[k]).

    Entries with logs == -inf are skipped.
    """
    m = -np.inf
    for k in range(logs.shape[0]):
        if logs[k] > m:
            m = logs[k]
    if m == -np.inf:
        return -np.inf, 0.0
    s = 0.0
    c = 0.0
    for k in range(logs.shape[0]):
        if logs[k] == -np.inf:
            continue
        x = signs[k] * np.exp(logs[k] - m)
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    s += c
    if s == 0.0:
        return -np.inf, 0.0
    return m + np.log(abs(s)), np.sign(s)


def signed_binom_logs(L, n):
    """log|b_{k,L}| and sign(b_{k,L}) for k = 0..n, any real L.

    b_{k,L} = L(L+1)...(L+k-1)/k!; once a factor L+j vanishes every later
    coefficient is zero (log = -inf, sign = 0).
    """
    L = float(L)
    j = np.arange(n, dtype=float)
    ratio = (L + j) / (j + 1.0)
    logs = np.empty(n + 1)
    signs = np.empty(n + 1)
    logs[0] = 0.0
    signs[0] = 1.0
    if n == 0:
        return logs, signs
    with np.errstate(divide="ignore"):
        # log1p keeps the per-factor rounding relative to (L-1)/(j+1)
        steps = np.log1p((L - 1.0) / (j + 1.0)) if L > 0 else np.log(np.abs(ratio))
    logs[1:] = compensated_cumsum(steps)
    signs[1:] = np.cumprod(np.sign(ratio))
    dead = signs == 0.0
    logs[dead] = -np.inf
    return logs, signs
