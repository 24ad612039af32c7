"""Deterministic coefficient sequences c_0..c_n and generalized polynomials.

Magnitudes are carried as natural logs next to a sign array because the
squared coefficients h(k) overflow double range for large L and k.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from ._numerics import compensated_cumsum, signed_binom_logs, signed_log_sum

PROFILE_KINDS = ("kac", "hyperbolic", "kac_derivative", "power_law", "genpoly_sqrt", "explicit")


class ProfileError(ValueError):
    pass


def binom_coeff_log(L: float, k: int) -> float:
    """Natural log of L(L+1)...(L+k-1)/k!  (0 at k = 0)."""
    if isinstance(k, bool) or not float(k).is_integer():
        raise ProfileError(f"k must be a nonnegative integer, got {k!r}")
    k = int(k)
    if k < 0:
        raise ProfileError(f"k must be a nonnegative integer, got {k}")
    if not L > 0:
        raise ProfileError(f"L must be positive, got {L}")
    if k == 0:
        return 0.0
    a = (L - 1.0) / np.arange(1, k + 1, dtype=float)
    return math.fsum(np.log1p(a))


def binom_coeff_logs(L: float, n: int) -> np.ndarray:
    """Vector of binom_coeff_log(L, k) for k = 0..n."""
    if not L > 0:
        raise ProfileError(f"L must be positive, got {L}")
    return signed_binom_logs(L, n)[0]


@dataclass(frozen=True)
class GeneralizedPolynomial:
    """h(k) = sum_j alpha_j * L_j(L_j+1)...(L_j+k-1)/k!  with 0 < L_0 < ... < L_d."""

    terms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        terms = tuple((float(L), float(a)) for L, a in self.terms)
        if not terms:
            raise ProfileError("generalized polynomial needs at least one term")
        Ls = [L for L, _ in terms]
        if any(not L > 0 for L in Ls):
            raise ProfileError("exponents L_j must be positive")
        if any(b <= a for a, b in zip(Ls, Ls[1:])):
            raise ProfileError("exponents L_j must be strictly increasing")
        if terms[-1][1] == 0.0:
            raise ProfileError("leading coefficient alpha_d must be nonzero")
        object.__setattr__(self, "terms", terms)

    @property
    def degree(self) -> float:
        return self.terms[-1][0] - 1.0

    @property
    def leading(self) -> tuple[float, float]:
        return self.terms[-1]

    def __call__(self, k: int) -> float:
        return eval_genpoly(self, k)

    def log_values(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """(log|h(k)|, sign h(k)) for k = 0..n by signed log-sum."""
        logs = np.array([binom_coeff_logs(L, n) for L, _ in self.terms])
        alphas = np.array([a for _, a in self.terms])
        with np.errstate(divide="ignore"):
            la = np.log(np.abs(alphas))
        out_log = np.empty(n + 1)
        out_sign = np.empty(n + 1)
        sa = np.sign(alphas)
        for k in range(n + 1):
            out_log[k], out_sign[k] = signed_log_sum(logs[:, k] + la, sa)
        return out_log, out_sign

    @classmethod
    def from_monomial(cls, coeffs: Sequence[float]) -> "GeneralizedPolynomial":
        """Rewrite h(k) = sum_j coeffs[j] k^j in the binomial basis L_j = j + 1.

        The basis polynomial (k+1)...(k+j)/j! has degree j, so the change of
        basis is triangular; it is solved exactly over the rationals.
        """
        coeffs = [Fraction(c).limit_denominator(10**12) if isinstance(c, float) else Fraction(c)
                  for c in coeffs]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        if not coeffs:
            raise ProfileError("zero polynomial is not a generalized polynomial")
        d = len(coeffs) - 1
        basis = [_binomial_basis_monomials(j) for j in range(d + 1)]
        rem = list(coeffs)
        alphas = [Fraction(0)] * (d + 1)
        for j in range(d, -1, -1):
            alphas[j] = rem[j] / basis[j][j]
            for i in range(j + 1):
                rem[i] -= alphas[j] * basis[j][i]
        terms = [(j + 1.0, float(a)) for j, a in enumerate(alphas) if a != 0]
        return cls(tuple(terms))


def _binomial_basis_monomials(j: int) -> list[Fraction]:
    """Monomial coefficients of (k+1)(k+2)...(k+j)/j!."""
    poly = [Fraction(1)]
    for m in range(1, j + 1):
        nxt = [Fraction(0)] * (len(poly) + 1)
        for i, c in enumerate(poly):
            nxt[i] += c * m
            nxt[i + 1] += c
        poly = nxt
    f = math.factorial(j)
    return [c / f for c in poly]


def eval_genpoly(h: GeneralizedPolynomial, k: int) -> float:
    if k < 0 or not float(k).is_integer():
        raise ProfileError(f"k must be a nonnegative integer, got {k!r}")
    logs = np.array([binom_coeff_log(L, int(k)) for L, _ in h.terms])
    alphas = np.array([a for _, a in h.terms])
    with np.errstate(divide="ignore"):
        la = np.log(np.abs(alphas))
    lg, sg = signed_log_sum(logs + la, np.sign(alphas))
    return float(sg * np.exp(lg))


@dataclass(frozen=True)
class CoefficientProfile:
    """A named rule for c_0..c_n; the degree n is supplied at generation time."""

    kind: str
    L: float | None = None
    d: int | None = None
    rho: float | None = None
    scale: float = 1.0
    h: GeneralizedPolynomial | None = None
    head: tuple[float, ...] | None = None
    values: tuple[float, ...] | None = None
    N0: int = 0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ProfileError(f"unknown profile kind {self.kind!r}")
        if self.kind == "hyperbolic" and not (self.L is not None and self.L > 0):
            raise ProfileError("hyperbolic profile needs L > 0")
        if self.kind == "kac_derivative" and not (self.d is not None and int(self.d) == self.d and self.d >= 0):
            raise ProfileError("kac_derivative profile needs an integer d >= 0")
        if self.kind == "power_law":
            if self.rho is None or not self.rho > -0.5:
                raise ProfileError("power_law profile needs rho > -1/2")
            if not self.scale > 0:
                raise ProfileError("power_law profile needs scale > 0")
        if self.kind == "genpoly_sqrt" and self.h is None:
            raise ProfileError("genpoly_sqrt profile needs h")
        if self.kind == "explicit":
            if not self.values:
                raise ProfileError("explicit profile needs a nonempty value list")
            if not all(math.isfinite(v) for v in self.values):
                raise ProfileError("explicit values must be finite")
        if self.N0 < 0:
            raise ProfileError("N0 must be nonnegative")

    @property
    def label(self) -> str:
        if self.kind == "hyperbolic":
            return f"hyperbolic:L={self.L:g}"
        if self.kind == "kac_derivative":
            return f"kac_derivative:d={self.d}"
        if self.kind == "power_law":
            return f"power_law:rho={self.rho:g},scale={self.scale:g}"
        if self.kind == "genpoly_sqrt":
            return "genpoly_sqrt:" + ";".join(f"{L:g}:{a:g}" for L, a in self.h.terms)
        if self.kind == "explicit":
            return f"explicit[{len(self.values)}]"
        return self.kind

    @property
    def growth_exponent(self) -> float:
        """rho in tau1 i^rho <= |c_i| <= tau2 i^rho."""
        if self.kind == "kac":
            return 0.0
        if self.kind == "hyperbolic":
            return (self.L - 1.0) / 2.0
        if self.kind == "kac_derivative":
            return float(self.d)
        if self.kind == "power_law":
            return float(self.rho)
        if self.kind == "genpoly_sqrt":
            return self.h.degree / 2.0
        # explicit: least-squares slope of log|c_i| against log i over the tail
        v = np.abs(np.asarray(self.values, dtype=float))
        i = np.arange(len(v))
        keep = (i >= max(self.N0, 1)) & (v > 0)
        if keep.sum() < 2:
            return 0.0
        return float(np.polyfit(np.log(i[keep]), np.log(v[keep]), 1)[0])

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "hyperbolic":
            out["L"] = self.L
        elif self.kind == "kac_derivative":
            out["d"] = self.d
        elif self.kind == "power_law":
            out.update(rho=self.rho, scale=self.scale)
        elif self.kind == "genpoly_sqrt":
            out["terms"] = [list(t) for t in self.h.terms]
            if self.head is not None:
                out["head"] = list(self.head)
        elif self.kind == "explicit":
            out["values"] = list(self.values)
        if self.N0:
            out["N0"] = self.N0
        return out


def kac() -> CoefficientProfile:
    return CoefficientProfile("kac")


def hyperbolic(L: float) -> CoefficientProfile:
    return CoefficientProfile("hyperbolic", L=float(L))


def kac_derivative(d: int) -> CoefficientProfile:
    return CoefficientProfile("kac_derivative", d=int(d))


def power_law(rho: float, scale: float = 1.0) -> CoefficientProfile:
    return CoefficientProfile("power_law", rho=float(rho), scale=float(scale))


def genpoly_sqrt(h: GeneralizedPolynomial, N0: int = 0, head: Sequence[float] | None = None) -> CoefficientProfile:
    return CoefficientProfile("genpoly_sqrt", h=h, N0=int(N0), head=None if head is None else tuple(head))


def explicit(values: Sequence[float], N0: int = 0) -> CoefficientProfile:
    return CoefficientProfile("explicit", values=tuple(float(v) for v in values), N0=int(N0))


@dataclass(frozen=True)
class CoeffSequence:
    """Realized c_0..c_n with log-magnitudes and Condition-1 constants."""

    profile: CoefficientProfile
    log_abs: np.ndarray
    sign: np.ndarray
    rho: float
    tau1: float
    tau2: float
    N0: int
    values: np.ndarray = field(repr=False)

    @property
    def degree(self) -> int:
        return len(self.log_abs) - 1

    def __len__(self):
        return len(self.log_abs)


def _raw_sequence(profile: CoefficientProfile, n: int) -> tuple[np.ndarray, np.ndarray]:
    k = profile.kind
    if k == "kac":
        return np.zeros(n + 1), np.ones(n + 1)
    if k == "hyperbolic":
        return 0.5 * binom_coeff_logs(profile.L, n), np.ones(n + 1)
    if k == "kac_derivative":
        d = profile.d
        m = n - d
        if m < 0:
            raise ProfileError(f"kac_derivative d={d} needs n >= d")
        i = np.arange(m + 1, dtype=float)
        la = np.zeros(m + 1)
        for j in range(1, d + 1):
            la += np.log(i + j)
        return la, np.ones(m + 1)
    if k == "power_law":
        i = np.arange(n + 1, dtype=float)
        la = np.full(n + 1, math.log(profile.scale))
        la[1:] += profile.rho * np.log(i[1:])
        return la, np.ones(n + 1)
    if k == "genpoly_sqrt":
        lh, sh = profile.h.log_values(n)
        la = 0.5 * lh
        sg = np.ones(n + 1)
        N0 = profile.N0
        if np.any(sh[N0:] <= 0):
            bad = int(np.nonzero(sh[N0:] <= 0)[0][0]) + N0
            raise ProfileError(f"h(k) <= 0 at k={bad} >= N0={N0}")
        if N0:
            head = profile.head if profile.head is not None else (1.0,) * N0
            if len(head) < min(N0, n + 1):
                raise ProfileError("head must list c_k for every k < N0")
            hv = np.asarray(head[: min(N0, n + 1)], dtype=float)
            with np.errstate(divide="ignore"):
                la[: len(hv)] = np.log(np.abs(hv))
            sg[: len(hv)] = np.where(hv < 0, -1.0, 1.0)
        return la, sg
    v = np.asarray(profile.values, dtype=float)
    if n is not None and n + 1 != len(v):
        raise ProfileError(f"explicit profile has degree {len(v) - 1}, requested n={n}")
    with np.errstate(divide="ignore"):
        return np.log(np.abs(v)), np.where(v < 0, -1.0, 1.0)


def coeff_sequence(profile: CoefficientProfile, n: int | None = None) -> CoeffSequence:
    """Generate and validate c_0..c_n for the profile.

    kac_derivative(d) returns the coefficients of the d-th derivative of the
    degree-n Kac polynomial (divided by nothing), so its length is n - d + 1.
    """
    if n is None:
        if profile.kind != "explicit":
            raise ProfileError("degree n is required")
        n = len(profile.values) - 1
    n = int(n)
    if n < 0:
        raise ProfileError("degree must be nonnegative")
    la, sg = _raw_sequence(profile, n)
    if not np.all(np.isfinite(la) | (la == -np.inf)):
        raise ProfileError("non-finite coefficient")
    rho = profile.growth_exponent
    N0 = profile.N0
    i = np.arange(len(la), dtype=float)
    tail = i >= max(N0, 1)
    ratio = la[tail] - rho * np.log(i[tail])
    tau1 = float(np.exp(ratio.min())) if ratio.size else math.inf
    tau2_tail = float(np.exp(ratio.max())) if ratio.size else 0.0
    head_mask = i < max(N0, 1)
    tau2_head = float(np.exp(la[head_mask].max())) if head_mask.any() else 0.0
    tau2 = max(tau2_tail, tau2_head)
    if ratio.size and not tau1 > 0:
        raise ProfileError("Condition 1 violated: |c_i| = 0 beyond N0 (tau1 = 0)")
    if not math.isfinite(tau2):
        raise ProfileError("Condition 1 violated: unbounded tau2")
    values = sg * np.exp(la)
    return CoeffSequence(profile, la, sg, rho, tau1, tau2, N0, values)


# ----------------------------------------------------------------- parsing

def parse_profile(spec) -> CoefficientProfile:
    """Build a profile from a dict, a JSON string, or a compact string.

    Compact forms: ``kac``, ``hyperbolic:L=4``, ``kac_derivative:d=1``,
    ``power_law:rho=0.5,scale=2``, ``genpoly_sqrt:terms=1:-1;2:1,N0=1``,
    ``explicit:path/to/values.csv``.
    """
    if isinstance(spec, CoefficientProfile):
        return spec
    if isinstance(spec, str):
        s = spec.strip()
        if s.startswith("{"):
            return parse_profile(json.loads(s))
        kind, _, rest = s.partition(":")
        kind = kind.strip()
        if kind == "explicit":
            return explicit(read_csv_values(rest), N0=0)
        d: dict = {"kind": kind}
        if rest:
            for part in rest.split(","):
                key, _, val = part.partition("=")
                key = key.strip()
                if key == "terms":
                    d["terms"] = [[float(x) for x in t.split(":")] for t in val.split(";") if t]
                elif key == "head":
                    d["head"] = [float(x) for x in val.split(";") if x]
                else:
                    d[key] = float(val)
        return parse_profile(d)
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ProfileError(f"profile spec must be a dict with 'kind', got {spec!r}")
    kind = spec["kind"]
    N0 = int(spec.get("N0", 0))
    try:
        if kind == "kac":
            return kac()
        if kind == "hyperbolic":
            return hyperbolic(spec["L"])
        if kind == "kac_derivative":
            return kac_derivative(int(spec["d"]))
        if kind == "power_law":
            return power_law(spec["rho"], spec.get("scale", 1.0))
        if kind == "genpoly_sqrt":
            h = GeneralizedPolynomial(tuple(tuple(t) for t in spec["terms"]))
            return genpoly_sqrt(h, N0=N0, head=spec.get("head"))
        if kind == "explicit":
            vals = spec.get("values")
            if vals is None and "csv" in spec:
                vals = read_csv_values(spec["csv"])
            return explicit(vals, N0=N0)
    except KeyError as e:
        raise ProfileError(f"profile {kind!r} is missing field {e.args[0]!r}") from None
    raise ProfileError(f"unknown profile kind {kind!r}")


def read_csv_values(path) -> list[float]:
    out = []
    with open(Path(path), newline="") as fh:
        for row in csv.reader(fh):
            for cell in row:
                cell = cell.strip()
                if not cell:
                    continue
                try:
                    out.append(float(cell))
                except ValueError:
                    continue  # header
    if not out:
        raise ProfileError(f"no numeric values in {path}")
    return out


def generalized_form(profile: CoefficientProfile):
    """Return (h, N0, head_coeffs) with c_k^2 = h(k) for k >= N0.

    head_coeffs are the polynomial coefficients of
    g(x) = sum_{k<N0} (c_k^2 - h(k)) x^k.  Raises for profiles that have no
    exact generalized-polynomial form.
    """
    k = profile.kind
    if k == "kac":
        return GeneralizedPolynomial(((1.0, 1.0),)), 0, np.zeros(0)
    if k == "hyperbolic":
        return GeneralizedPolynomial(((profile.L, 1.0),)), 0, np.zeros(0)
    if k == "kac_derivative":
        # c_i^2 = ((i+1)...(i+d))^2
        poly = np.polynomial.Polynomial([1.0])
        for j in range(1, profile.d + 1):
            poly = poly * np.polynomial.Polynomial([float(j), 1.0])
        sq = (poly * poly).coef
        return GeneralizedPolynomial.from_monomial([int(round(c)) for c in sq]), 0, np.zeros(0)
    if k == "power_law":
        two_rho = 2.0 * profile.rho
        if not float(two_rho).is_integer() or two_rho < 0:
            raise ProfileError("power_law has a generalized-polynomial form only for 2*rho in N")
        m = int(two_rho)
        mono = [0.0] * m + [profile.scale ** 2]
        h = GeneralizedPolynomial.from_monomial(mono)
        head = np.zeros(1)
        head[0] = profile.scale ** 2 - eval_genpoly(h, 0)
        return h, (1 if head[0] != 0 else 0), head if head[0] != 0 else np.zeros(0)
    if k == "genpoly_sqrt":
        N0 = profile.N0
        seq = coeff_sequence(profile, max(N0, 1))
        head = np.array([seq.values[j] ** 2 - eval_genpoly(profile.h, j) for j in range(N0)])
        return profile.h, N0, head
    raise ProfileError(f"profile {profile.label} has no generalized-polynomial form")


def classical_degree(profile: CoefficientProfile) -> int | None:
    """Degree of c_i as a classical polynomial in i (None if it is not one)."""
    k = profile.kind
    if k == "kac":
        return 0
    if k == "hyperbolic":
        return 0 if profile.L == 1.0 else None
    if k == "kac_derivative":
        return profile.d
    if k == "power_law":
        return int(profile.rho) if float(profile.rho).is_integer() and profile.rho >= 0 else None
    return None
