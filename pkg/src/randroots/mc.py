"""Monte Carlo experiments on roots of random polynomials.

Sample i always uses the stream at path (i,) under the root seed, so every
estimate is a deterministic function of (root_seed, sample range) no matter
how the indices are split across worker processes.  Per-sample statistics
are gathered in index order and reduced with plain numpy sums over that
fixed order.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import multiprocessing as mp
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize

from .atoms import AtomSpec, SeedStream, parse_seed
from .coeff_profiles import CoefficientProfile, classical_degree, coeff_sequence
from .roots import Disk, Interval, RootError, count_in_set, disk_counts_certified, find_roots


class MCError(ValueError):
    pass


# ------------------------------------------------------------ sampling

@lru_cache(maxsize=64)
def _base_coefficients(profile: CoefficientProfile, n: int) -> np.ndarray:
    # divided by max |c_k|: roots do not change and nothing overflows
    seq = coeff_sequence(profile, n)
    out = seq.sign * np.exp(seq.log_abs - seq.log_abs.max())
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SampleSpec:
    """Random polynomial family sum_k c_k xi_k z^k of degree n."""

    profile: CoefficientProfile
    atom: AtomSpec
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise MCError("degree must be >= 1")
        if self.atom.mean != 0.0 and classical_degree(self.profile) is None:
            raise MCError("nonzero-mean atoms need coefficients that are a classical polynomial in k "
                          f"(got {self.profile.label})")

    def coefficients(self, root_seed: int, index: int) -> np.ndarray:
        base = _base_coefficients(self.profile, self.n)
        stream = SeedStream(root_seed, (index,))
        # kac_derivative(d) has n - d + 1 coefficients
        return base * self.atom.draw(stream.rng, len(base))

    def to_dict(self):
        return {"profile": self.profile.to_dict(), "atom": self.atom.to_dict(), "n": self.n}


class Statistic:
    """Per-sample statistic: maps (coeffs, RootSample or None) to a float vector."""

    needs_roots = True
    size = 1

    def __call__(self, coeffs, sample):
        raise NotImplementedError


@dataclass(frozen=True)
class RealCounts(Statistic):
    intervals: tuple = ((-math.inf, math.inf),)

    @property
    def size(self):
        return len(self.intervals)

    def __call__(self, coeffs, sample):
        return np.array([count_in_set(sample, Interval(a, b)) for a, b in self.intervals], dtype=float)


@dataclass(frozen=True)
class RealHistogram(Statistic):
    edges: tuple

    @property
    def size(self):
        return len(self.edges) - 1

    def __call__(self, coeffs, sample):
        h, _ = np.histogram(sample.real_roots, bins=np.asarray(self.edges))
        return h.astype(float)


@dataclass(frozen=True)
class DiskCounts(Statistic):
    """Certified root counts in nested disks around a real center (no full solve)."""

    center: float
    radii: tuple
    needs_roots = False

    @property
    def size(self):
        return len(self.radii)

    def __call__(self, coeffs, sample):
        counts, _ = disk_counts_certified(coeffs, self.center, self.radii)
        return np.asarray(counts, dtype=float)


def _chunk(spec, stat, root_seed, lo, hi):
    vals = np.full((hi - lo, stat.size), np.nan)
    ok = np.zeros(hi - lo, dtype=bool)
    for j, i in enumerate(range(lo, hi)):
        a = spec.coefficients(root_seed, i)
        sample = None
        if stat.needs_roots:
            sample = find_roots(a, seed_path=(i,))
            if sample.degenerate:
                continue
        try:
            vals[j] = stat(a, sample)
        except RootError:
            continue
        ok[j] = True
    return vals, ok


@dataclass
class SampleBatch:
    values: np.ndarray  # (included, stat.size), index order
    indices: np.ndarray
    excluded: int
    wall_time: float

    @property
    def count(self) -> int:
        return len(self.indices)


def run_samples(spec: SampleSpec, stat: Statistic, samples: int, root_seed=0, workers: int = 1,
                start: int = 0) -> SampleBatch:
    """Evaluate ``stat`` on samples start .. start+samples-1.

    Work is split into contiguous index chunks; results are concatenated in
    index order, so the output is identical for any worker count.
    """
    root_seed = parse_seed(root_seed)
    if samples < 1:
        raise MCError("need at least one sample")
    t0 = time.perf_counter()
    workers = max(1, int(workers))
    if workers == 1:
        parts = [_chunk(spec, stat, root_seed, start, start + samples)]
    else:
        nchunks = min(samples, 4 * workers)
        cuts = np.linspace(start, start + samples, nchunks + 1).astype(int)
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            futs = [pool.submit(_chunk, spec, stat, root_seed, int(lo), int(hi))
                    for lo, hi in zip(cuts[:-1], cuts[1:]) if hi > lo]
            parts = [f.result() for f in futs]
    vals = np.concatenate([p[0] for p in parts])
    ok = np.concatenate([p[1] for p in parts])
    idx = np.arange(start, start + samples)[ok]
    return SampleBatch(vals[ok], idx, int((~ok).sum()), time.perf_counter() - t0)


# ------------------------------------------------------------- reports

@dataclass
class StatEstimate:
    estimate: float
    se: float
    count: int
    excluded: int

    def to_dict(self):
        return {"estimate": self.estimate, "se": self.se, "count": self.count, "excluded": self.excluded}


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ExperimentReport:
    config: dict
    stats: dict
    root_seed: int
    wall_time: float
    extra: dict = field(default_factory=dict)

    def __getitem__(self, key) -> StatEstimate:
        return self.stats[key]

    def to_dict(self):
        return {"config": self.config, "config_hash": config_hash(self.config),
                "root_seed": self.root_seed, "wall_time": self.wall_time,
                "stats": {k: v.to_dict() for k, v in self.stats.items()}, **self.extra}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    m = len(x)
    if m == 0:
        raise MCError("all samples were excluded")
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(m)) if m > 1 else math.inf
    return mean, se


def jackknife_variance(x):
    """(sample variance, jackknife standard error of it)."""
    x = np.asarray(x, dtype=float)
    m = len(x)
    if m < 3:
        raise MCError("jackknife variance needs at least 3 values")
    c = x - x.mean()
    s1 = c.sum()
    s2 = (c * c).sum()
    var = s2 / (m - 1)
    # leave-one-out variances in closed form
    loo_mean = (s1 - c) / (m - 1)
    loo = ((s2 - c * c) - (m - 1) * loo_mean ** 2) / (m - 2)
    se = math.sqrt((m - 1) / m * float(np.sum((loo - loo.mean()) ** 2)))
    return float(var), se


def mc_expected_count(profile, atom, n, interval=(-math.inf, math.inf), samples=1000, root_seed=0,
                      workers=1) -> ExperimentReport:
    if samples < 2:
        raise MCError("need samples >= 2")
    spec = SampleSpec(profile, atom, n)
    batch = run_samples(spec, RealCounts((tuple(interval),)), samples, root_seed, workers)
    mean, se = _mean_se(batch.values[:, 0])
    cfg = {"op": "mc_expected_count", **spec.to_dict(), "interval": list(interval), "samples": samples}
    return ExperimentReport(cfg, {"count": StatEstimate(mean, se, batch.count, batch.excluded)},
                            parse_seed(root_seed), batch.wall_time)


def mc_variance_count(profile, atom, n, samples=1000, root_seed=0, workers=1) -> ExperimentReport:
    if samples < 30:
        raise MCError("need samples >= 30")
    spec = SampleSpec(profile, atom, n)
    batch = run_samples(spec, RealCounts(), samples, root_seed, workers)
    x = batch.values[:, 0]
    mean, se = _mean_se(x)
    var, vse = jackknife_variance(x)
    ln = math.log(n) if n > 1 else math.nan
    stats = {"count": StatEstimate(mean, se, batch.count, batch.excluded),
             "variance": StatEstimate(var, vse, batch.count, batch.excluded),
             "variance_over_log_n": StatEstimate(var / ln, vse / ln, batch.count, batch.excluded)}
    cfg = {"op": "mc_variance_count", **spec.to_dict(), "samples": samples}
    return ExperimentReport(cfg, stats, parse_seed(root_seed), batch.wall_time)


@dataclass
class EmpiricalDensity:
    edges: np.ndarray
    density: np.ndarray
    se: np.ndarray
    samples: int
    excluded: int

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def empirical_density(profile, atom, n, bins=50, range_=(-2.0, 2.0), samples=1000, root_seed=0,
                      workers=1) -> EmpiricalDensity:
    """Per-bin (real roots) / (samples * width), with per-bin standard errors."""
    if bins < 1:
        raise MCError("bins must be >= 1")
    edges = np.linspace(range_[0], range_[1], bins + 1)
    spec = SampleSpec(profile, atom, n)
    batch = run_samples(spec, RealHistogram(tuple(edges)), samples, root_seed, workers)
    width = np.diff(edges)
    v = batch.values
    dens = v.mean(axis=0) / width
    se = v.std(axis=0, ddof=1) / math.sqrt(len(v)) / width
    return EmpiricalDensity(edges, dens, se, batch.count, batch.excluded)


# ---------------------------------------------------------- correlation

def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = u < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def _bump_mass(dim: int) -> float:
    if dim == 1:
        return 2.0 * sp_integrate.quad(lambda u: math.exp(-1.0 / (1.0 - u * u)), 0.0, 1.0)[0]
    return 2.0 * math.pi * sp_integrate.quad(lambda r: r * math.exp(-1.0 / (1.0 - r * r)), 0.0, 1.0)[0]


def bump(w, radius, dim):
    """Unit-mass C-infinity bump exp(-1/(1-|w/radius|^2)) on R (dim 1) or C (dim 2)."""
    return _bump(np.abs(w) / radius) / (_bump_mass(dim) * radius ** dim)


@dataclass(frozen=True)
class CorrelationWindow:
    """Centers near the unit circle with the microscopic rescaling z -> z / s.

    I(delta) = [1 - 2 delta, 1 - delta]; the rescale factor s defaults to
    1e-3 delta and the bump support radius is given in rescaled units.
    """

    delta: float
    centers: tuple
    support: float = 1e-3
    rescale: float | None = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise MCError("delta must lie in (0, 1)")
        if not self.centers:
            raise MCError("window needs at least one center")
        lo, hi = 1.0 - 2.0 * self.delta, 1.0 - self.delta
        for c in self.centers:
            if not lo - 1e-12 <= abs(c) <= hi + 1e-12:
                raise MCError(f"center {c} is outside I(delta) = [{lo:g}, {hi:g}]")
        if self.support <= 0:
            raise MCError("support radius must be positive")

    @property
    def scale(self) -> float:
        return 1e-3 * self.delta if self.rescale is None else float(self.rescale)

    def rotated(self, theta: float) -> "CorrelationWindow":
        rot = complex(math.cos(theta), math.sin(theta))
        return CorrelationWindow(self.delta, tuple(complex(c) * rot for c in self.centers),
                                 self.support, self.rescale)

    @classmethod
    def default(cls, k=1, delta=0.05, support=1e-3, rescale=None, angles=None):
        """Centers on |z| = 1 - 1.5 delta at the given angles (default spread in the upper half)."""
        r = 1.0 - 1.5 * delta
        if angles is None:
            angles = [math.pi / 2 + 0.3 * j for j in range(k)]
        return cls(delta, tuple(r * complex(math.cos(a), math.sin(a)) for a in angles), support, rescale)


def _tuple_sum(slot_vals):
    """sum over distinct-index tuples of prod_j G_j, given per-slot {index: value}."""
    total = 0.0
    for combo in itertools.product(*[list(d.items()) for d in slot_vals]):
        idx = [c[0] for c in combo]
        if len(set(idx)) == len(idx):
            total += math.prod(c[1] for c in combo)
    return total


@dataclass(frozen=True)
class CorrelationStat(Statistic):
    """sum over distinct root tuples of prod_j g(z_(i_j)/s - c_j/s).

    mode 'complex': every slot takes any root (k-point function of all
    zeros).  mode 'mixed': the first k slots take real roots (1-d bump) and
    the remaining l slots roots in the open upper half plane (2-d bump).
    """

    window: CorrelationWindow
    k: int
    l: int = 0
    mode: str = "complex"

    def __call__(self, coeffs, sample):
        w = self.window
        s = w.scale
        roots = sample.roots / s
        slots = []
        for j, c in enumerate(w.centers):
            cj = complex(c) / s
            if self.mode == "complex":
                pool = np.arange(len(roots))
                dim = 2
            elif j < self.k:
                pool = np.flatnonzero(sample.is_real)
                dim = 1
            else:
                pool = np.flatnonzero(~sample.is_real & (sample.roots.imag > 0))
                dim = 2
            d = np.abs(roots[pool] - cj)
            near = pool[d < w.support]
            vals = bump(roots[near] - cj, w.support, dim)
            slots.append(dict(zip(near.tolist(), vals.tolist())))
        return np.array([_tuple_sum(slots)])


@dataclass
class CorrelationEstimate:
    k: int
    l: int
    window: CorrelationWindow
    estimate: float
    se: float
    samples: int
    excluded: int


def correlation_estimate(profile, atom, n, window: CorrelationWindow, orders=(1, 0), samples=1000,
                         root_seed=0, mode=None, workers=1) -> CorrelationEstimate:
    k, l = orders
    if k + l < 1:
        raise MCError("need k + l >= 1")
    if mode is None:
        mode = "complex" if l == 0 and atom.is_complex else ("mixed" if l or not atom.is_complex else "complex")
    slots = k if mode == "complex" else k + l
    if len(window.centers) != slots:
        raise MCError(f"window has {len(window.centers)} centers, orders need {slots}")
    spec = SampleSpec(profile, atom, n)
    batch = run_samples(spec, CorrelationStat(window, k, l, mode), samples, root_seed, workers)
    mean, se = _mean_se(batch.values[:, 0])
    return CorrelationEstimate(k, l, window, mean, se, batch.count, batch.excluded)


@dataclass(frozen=True)
class RotationPair(Statistic):
    window: CorrelationWindow
    theta: float
    k: int = 1
    size = 2

    def __call__(self, coeffs, sample):
        a = CorrelationStat(self.window, self.k, 0, "complex")(coeffs, sample)[0]
        b = CorrelationStat(self.window.rotated(self.theta), self.k, 0, "complex")(coeffs, sample)[0]
        return np.array([a, b])


@dataclass
class RotationGap:
    theta: float
    gap: float
    se: float
    estimate: float
    rotated_estimate: float
    samples: int
    excluded: int

    @property
    def abs_gap(self) -> float:
        return abs(self.gap)


def rotation_invariance_check(profile, atom, n, window: CorrelationWindow, theta, samples=1000,
                              root_seed=0, k=1, workers=1) -> RotationGap:
    """Paired difference of k-point estimates at the centers and at the rotated centers.

    The bump is radial, so rotating the test function with the window
    leaves it unchanged.
    """
    if not atom.is_complex:
        raise MCError("rotation invariance needs complex Gaussian atoms")
    if profile.kind not in ("hyperbolic", "kac"):
        raise MCError("rotation invariance is stated for hyperbolic series")
    spec = SampleSpec(profile, atom, n)
    batch = run_samples(spec, RotationPair(window, float(theta), k), samples, root_seed, workers)
    diff = batch.values[:, 0] - batch.values[:, 1]
    gap, se = _mean_se(diff)
    return RotationGap(float(theta), gap, se, float(batch.values[:, 0].mean()),
                       float(batch.values[:, 1].mean()), batch.count, batch.excluded)


# ------------------------------------------------------- repulsion probe

@dataclass
class RepulsionResult:
    center: float
    gammas: np.ndarray
    radii: np.ndarray
    hits: np.ndarray
    probability: np.ndarray
    se: np.ndarray
    samples: int
    excluded: int
    scale: float
    delta: float

    def slope(self):
        return loglog_slope(self.gammas, self.hits, self.samples)


def delta_for_center(x: float) -> float:
    """delta with |x| = 1 - 1.5 delta, the middle of I(delta)."""
    d = (1.0 - abs(x)) / 1.5
    if not 0 < d < 1:
        raise MCError("center must satisfy 0 < 1 - |x| < 1.5")
    return d


def repulsion_probe(profile, atom, n, x, gammas, samples=1000, root_seed=0, scale=None,
                    workers=1) -> RepulsionResult:
    """Empirical P(at least two roots in B(x, gamma * scale)).

    ``scale`` maps rescaled radii to the polynomial's own coordinates; the
    default is the microscopic factor 1e-3 delta with delta from
    delta_for_center(x).  scale = 1 measures balls of radius gamma directly.
    """
    delta = delta_for_center(x)
    s = 1e-3 * delta if scale is None else float(scale)
    g = np.asarray(sorted(gammas, reverse=True), dtype=float)
    if np.any(g <= 0):
        raise MCError("gammas must be positive")
    spec = SampleSpec(profile, atom, n)
    if atom.is_complex:
        raise MCError("the repulsion probe counts real-coefficient roots")
    batch = run_samples(spec, DiskCounts(float(x), tuple(g * s)), samples, root_seed, workers)
    hits = (batch.values >= 2).sum(axis=0)
    m = batch.count
    p = hits / m
    se = np.sqrt(p * (1 - p) / m)
    return RepulsionResult(float(x), g, g * s, hits, p, se, m, batch.excluded, s, delta)


def loglog_slope(gammas, hits, samples):
    """Binomial maximum-likelihood fit of log p = a + b log gamma.

    Handles zero counts; returns (b, se_b) with se_b from the observed
    information.  Needs hits at two or more radii.
    """
    lg = np.log(np.asarray(gammas, dtype=float))
    h = np.asarray(hits, dtype=float)
    m = float(samples)
    if np.count_nonzero(h) < 2:
        raise MCError("need positive counts at two or more radii to fit a slope")
    xc = lg - lg.mean()

    def nll(theta):
        a, b = theta
        lp = np.minimum(a + b * xc, -1e-12)
        p = np.exp(lp)
        return -float(np.sum(h * lp + (m - h) * np.log1p(-p)))

    good = h > 0
    b0 = np.polyfit(xc[good], np.log(h[good] / m), 1)
    res = optimize.minimize(nll, x0=[b0[1], b0[0]], method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
    a, b = res.x
    # observed information by central differences
    eps = 1e-4
    hess = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            e_i = np.eye(2)[i] * eps
            e_j = np.eye(2)[j] * eps
            hess[i, j] = (nll(res.x + e_i + e_j) - nll(res.x + e_i - e_j)
                          - nll(res.x - e_i + e_j) + nll(res.x - e_i - e_j)) / (4 * eps * eps)
    cov = np.linalg.inv(hess)
    return float(b), float(math.sqrt(max(cov[1, 1], 0.0)))


# --------------------------------------------------- anti-concentration

@dataclass
class AntiConcentration:
    estimate: float
    se: float
    samples: int


def anticoncentration_probe(atom: AtomSpec, weights, z=0.0, radius=0.5, samples=10000,
                            root_seed=0, min_weight=None) -> AntiConcentration:
    """Empirical P(|sum_i a_i xi_i - z| <= radius)."""
    a = np.asarray(weights, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise MCError("weights must be a nonempty vector")
    if min_weight is not None and np.any(np.abs(a) < min_weight):
        raise MCError("weights must satisfy |a_i| >= min_weight")
    root_seed = parse_seed(root_seed)
    hit = np.empty(samples, dtype=bool)
    for i in range(samples):
        xi = atom.draw(SeedStream(root_seed, (i,)).rng, a.size)
        hit[i] = abs(float(np.dot(a, xi)) - z) <= radius
    p = float(hit.mean())
    return AntiConcentration(p, math.sqrt(p * (1 - p) / samples), samples)


# ---------------------------------------------------------- summaries

@dataclass
class MeanSummary:
    mean: float
    se: float
    count: int
    chebyshev: float | None = None


def mc_mean(values, variance_bound=None, lam=None) -> MeanSummary:
    """Mean, standard error and (optionally) the Chebyshev bound
    P(|S - E S| >= lam) <= variance_bound / (m lam^2)."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise MCError("empty sequence")
    m = x.size
    se = float(np.std(x, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    cheb = None
    if variance_bound is not None:
        if lam is None or lam <= 0:
            raise MCError("Chebyshev bound needs lam > 0")
        cheb = min(1.0, float(variance_bound) / (m * lam * lam))
    return MeanSummary(float(x.mean()), se, m, cheb)


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    residuals: np.ndarray
    pairwise: np.ndarray
    ns: np.ndarray
    values: np.ndarray


def slope_fit(ns, values) -> SlopeFit:
    """Least squares of values against ln n, plus pairwise slopes over consecutive n."""
    ns = np.asarray(ns, dtype=float)
    v = np.asarray(values, dtype=float)
    if ns.size < 3:
        raise MCError("slope fit needs at least 3 grid points")
    x = np.log(ns)
    A = np.vstack([x, np.ones_like(x)]).T
    (b, a), *_ = np.linalg.lstsq(A, v, rcond=None)
    pair = np.diff(v) / np.diff(x)
    return SlopeFit(float(b), float(a), v - (b * x + a), pair, ns, v)


@dataclass
class GapPoint:
    n: int
    gap: float
    se: float
    first: StatEstimate
    second: StatEstimate


def universality_gap(profile, atom_a, atom_b, ns, samples, root_seed=0, workers=1):
    """E N(R) under atom_a minus under atom_b at each n, with joint SE.

    The two atoms read disjoint seed streams (root_seed and root_seed + 1),
    so the estimates are independent and their SEs add in quadrature.
    """
    out = []
    for n, m in zip(ns, samples):
        ra = mc_expected_count(profile, atom_a, n, samples=m, root_seed=root_seed, workers=workers)["count"]
        rb = mc_expected_count(profile, atom_b, n, samples=m, root_seed=(root_seed + 1) % 2**64,
                               workers=workers)["count"]
        out.append(GapPoint(n, ra.estimate - rb.estimate, math.hypot(ra.se, rb.se), ra, rb))
    return out


def gap_trend(points):
    """Weighted least-squares slope of the gap against ln n and its SE."""
    x = np.log([p.n for p in points])
    y = np.array([p.gap for p in points])
    w = 1.0 / np.array([p.se for p in points]) ** 2
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    b = float(np.sum(w * (x - xm) * (y - ym)) / sxx)
    return b, float(math.sqrt(1.0 / sxx))
