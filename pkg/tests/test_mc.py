import itertools
import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy import special, stats

from randroots.atoms import COMPLEX_GAUSSIAN, RADEMACHER, gaussian
from randroots.coeff_profiles import hyperbolic, kac
from randroots.density import density_ek, expected_count, integrate_density
from randroots.mc import (
    CorrelationWindow,
    MCError,
    SampleSpec,
    anticoncentration_probe,
    bump,
    config_hash,
    correlation_estimate,
    empirical_density,
    jackknife_variance,
    loglog_slope,
    mc_expected_count,
    mc_mean,
    mc_variance_count,
    repulsion_probe,
    rotation_invariance_check,
    slope_fit,
    universality_gap,
)
from randroots.roots import find_roots
from randroots.variance_kernel import VarianceKernel

G = gaussian()


def joint(a, b):
    return math.hypot(a, b)


# ---------------------------------------------------------- counts

def test_linear_kac_counts_are_exact():
    r = mc_expected_count(kac(), G, 1, samples=500)
    assert r["count"].estimate == 1.0 and r["count"].se == 0.0 and r["count"].excluded == 0
    v = mc_variance_count(kac(), G, 1, samples=200)
    assert v["variance"].estimate == 0.0


def test_report_echo_and_hash():
    r = mc_expected_count(kac(), G, 8, interval=(0.0, 1.0), samples=50, root_seed=3)
    d = r.to_dict()
    assert d["config"]["n"] == 8 and d["root_seed"] == 3
    assert d["config_hash"] == config_hash(r.config)
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})


def test_worker_count_does_not_change_results():
    a = mc_expected_count(kac(), G, 24, samples=60, root_seed=5, workers=1)
    b = mc_expected_count(kac(), G, 24, samples=60, root_seed=5, workers=3)
    assert a["count"].estimate == b["count"].estimate and a["count"].se == b["count"].se


def test_argument_checks():
    with pytest.raises(MCError):
        mc_expected_count(kac(), G, 4, samples=1)
    with pytest.raises(MCError):
        mc_variance_count(kac(), G, 4, samples=10)
    with pytest.raises(MCError):
        SampleSpec(hyperbolic(2.0), gaussian(1.0), 8)
    with pytest.raises(MCError):
        SampleSpec(kac(), G, 0)


def test_jackknife_matches_direct_leave_one_out():
    x = np.random.default_rng(1).normal(size=40) ** 2
    var, se = jackknife_variance(x)
    assert var == pytest.approx(np.var(x, ddof=1), rel=1e-13)
    loo = np.array([np.var(np.delete(x, i), ddof=1) for i in range(len(x))])
    direct = math.sqrt((len(x) - 1) / len(x) * np.sum((loo - loo.mean()) ** 2))
    assert se == pytest.approx(direct, rel=1e-10)


def test_unbiased_coverage():
    # n = 1 Kac: P(root in [0, 1]) = 1/4 exactly
    inside = 0
    trials = 40
    for t in range(trials):
        r = mc_expected_count(kac(), G, 1, interval=(0.0, 1.0), samples=200, root_seed=100 + t)["count"]
        inside += abs(r.estimate - 0.25) <= 3 * r.se
    assert inside >= 0.95 * trials


def test_mc_matches_quadrature_n64():
    r = mc_expected_count(kac(), G, 64, samples=20000, root_seed=21)["count"]
    q = expected_count(VarianceKernel.from_profile(kac(), 64)).value
    assert abs(r.estimate - q) <= 3 * r.se


@pytest.mark.xfail(strict=True, reason="finite-n variance differs between atoms: at n=64 gaussian 2.19 vs "
                   "rademacher 1.71 (about 8 joint SE); only Var/ln n agrees asymptotically")
def test_variance_is_universal_between_atoms():
    a = mc_variance_count(kac(), G, 64, samples=4000, root_seed=31)["variance"]
    b = mc_variance_count(kac(), RADEMACHER, 64, samples=4000, root_seed=32)["variance"]
    assert abs(a.estimate - b.estimate) <= 3 * joint(a.se, b.se)


def test_rademacher_counts_by_enumeration():
    # all 2^10 sign patterns with positive leading sign at n = 10; the mean and
    # variance were obtained once by exact Sturm counting
    signs = np.array(list(itertools.product([-1.0, 1.0], repeat=11)))
    counts = np.array([find_roots(s).n_real for s in signs if s[-1] > 0])
    assert counts.mean() == 221 / 128
    assert counts.var() == pytest.approx(15927 / 16384, rel=1e-14)


# --------------------------------------------------------- densities

def test_empirical_density_chi_square_n1():
    edges_range = (-3.0, 3.0)
    h = empirical_density(kac(), G, 1, bins=30, range_=edges_range, samples=100_000, root_seed=41)
    width = np.diff(h.edges)
    counts = h.density * width * h.samples
    p = (np.arctan(h.edges[1:]) - np.arctan(h.edges[:-1])) / math.pi
    outside_obs = h.samples - counts.sum()
    obs = np.append(counts, outside_obs)
    exp = np.append(p, 1 - p.sum()) * h.samples
    chi2 = float(np.sum((obs - exp) ** 2 / exp))
    assert chi2 <= stats.chi2.ppf(0.999, len(obs) - 1)


def test_empirical_density_symmetry():
    h = empirical_density(kac(), G, 16, bins=20, range_=(-2.0, 2.0), samples=4000, root_seed=43)
    diff = np.abs(h.density - h.density[::-1])
    assert np.all(diff <= 4 * np.hypot(h.se, h.se[::-1]) + 1e-15)


def test_empirical_density_matches_quadrature_n128():
    k = VarianceKernel.from_profile(kac(), 128)
    h = empirical_density(kac(), G, 128, bins=16, range_=(-1.6, 1.6), samples=3000, root_seed=47)
    rho = lambda t: density_ek(k, t)  # noqa: E731
    exact = np.array([integrate_density(rho, a, b, n=128).value for a, b in zip(h.edges[:-1], h.edges[1:])])
    exact /= np.diff(h.edges)
    assert np.max(np.abs(h.density - exact) / h.se) <= 4


# -------------------------------------------------------- correlation

def test_bump_has_unit_mass():
    assert sp_integrate.quad(lambda u: bump(np.array([u]), 0.3, 1)[0], -0.3, 0.3)[0] == pytest.approx(1.0, rel=1e-8)
    mass2 = sp_integrate.quad(lambda r: 2 * math.pi * r * bump(np.array([r]), 0.3, 2)[0], 0, 0.3)[0]
    assert mass2 == pytest.approx(1.0, rel=1e-8)


def test_window_validation():
    with pytest.raises(MCError):
        CorrelationWindow(0.1, (0.5,))
    with pytest.raises(MCError):
        CorrelationWindow(1.5, (0.5,))
    with pytest.raises(MCError):
        CorrelationWindow(0.1, ())
    w = CorrelationWindow.default(2, delta=0.05)
    assert all(abs(abs(c) - 0.925) < 1e-15 for c in w.centers)
    assert w.scale == pytest.approx(5e-5)
    with pytest.raises(MCError):
        correlation_estimate(kac(), G, 4, w, orders=(1, 0), samples=10)


def test_one_point_correlation_matches_closed_form():
    delta, c, s = 0.1, 0.85, 0.05
    w = CorrelationWindow(delta, (c,), support=1.0, rescale=s)
    est = correlation_estimate(kac(), G, 1, w, orders=(1, 0), samples=40000, root_seed=51)
    # E sum g((x - c)/s) with the Cauchy density of the single root
    oracle = sp_integrate.quad(lambda u: s * bump(np.array([u]), 1.0, 1)[0] / (math.pi * (1 + (c + s * u) ** 2)),
                               -1, 1)[0]
    assert abs(est.estimate - oracle) <= 3 * est.se


def test_two_point_vanishes_with_one_root():
    w = CorrelationWindow(0.1, (0.85, 0.86), support=1.0, rescale=0.05)
    est = correlation_estimate(kac(), G, 1, w, orders=(2, 0), samples=2000, root_seed=53)
    assert est.estimate == 0.0


def test_correlation_universality_n512():
    w = CorrelationWindow(0.05, (0.925 * complex(math.cos(0.8), math.sin(0.8)),), support=1.0, rescale=0.03)
    a = correlation_estimate(kac(), G, 512, w, orders=(1, 0), samples=800, root_seed=55, mode="complex")
    b = correlation_estimate(kac(), RADEMACHER, 512, w, orders=(1, 0), samples=800, root_seed=56, mode="complex")
    assert a.estimate > 0 and b.estimate > 0
    assert abs(a.estimate - b.estimate) <= 4 * joint(a.se, b.se)


def rot_window():
    return CorrelationWindow.default(1, delta=0.05, support=1.0, rescale=0.03)


def test_rotation_zero_angle_is_exact():
    g = rotation_invariance_check(kac(), COMPLEX_GAUSSIAN, 64, rot_window(), 0.0, samples=200, root_seed=61)
    assert g.gap == 0.0


def test_rotation_quarter_turn():
    w = rot_window()
    p = rotation_invariance_check(hyperbolic(1.0), COMPLEX_GAUSSIAN, 256, w, math.pi / 2, samples=1500,
                                  root_seed=63)
    assert p.estimate > 0
    assert p.abs_gap <= 4 * p.se
    m = rotation_invariance_check(hyperbolic(1.0), COMPLEX_GAUSSIAN, 256, w, -math.pi / 2, samples=1500,
                                  root_seed=64)
    assert abs(p.gap - m.gap) <= 4 * joint(p.se, m.se)


def test_rotation_needs_complex_atoms():
    with pytest.raises(MCError):
        rotation_invariance_check(kac(), G, 16, rot_window(), 1.0, samples=10)


# ---------------------------------------------------------- repulsion

def test_repulsion_single_root():
    r = repulsion_probe(kac(), G, 1, 0.9, [0.1, 0.05], samples=500, scale=1.0)
    assert np.all(r.hits == 0)
    with pytest.raises(MCError):
        r.slope()


def test_repulsion_universal_between_atoms():
    kw = dict(x=0.9, gammas=[0.1, 0.05], samples=4000, scale=1.0)
    a = repulsion_probe(kac(), G, 64, root_seed=71, **kw)
    b = repulsion_probe(kac(), RADEMACHER, 64, root_seed=72, **kw)
    assert a.hits[0] > 0
    assert np.all(np.abs(a.probability - b.probability) <= 4 * np.hypot(a.se, b.se))


def test_loglog_slope_recovers_power():
    gammas = np.array([0.08, 0.04, 0.02, 0.01])
    m = 10**7
    hits = np.round(m * 0.5 * (gammas / 0.08) ** 1.5)
    b, se = loglog_slope(gammas, hits, m)
    assert b == pytest.approx(1.5, abs=1e-3) and se < 0.01


# ------------------------------------------------- anti-concentration

def test_anticoncentration_rademacher_n4():
    r = anticoncentration_probe(RADEMACHER, np.ones(4), samples=20000, root_seed=81)
    assert abs(r.estimate - 0.375) <= 3 * r.se


@pytest.mark.parametrize("n", [4, 25])
def test_anticoncentration_gaussian(n):
    r = anticoncentration_probe(G, np.ones(n), radius=0.5, samples=20000, root_seed=83)
    assert abs(r.estimate - special.erf(0.5 / math.sqrt(2 * n))) <= 3 * r.se


def test_anticoncentration_weight_floor():
    with pytest.raises(MCError):
        anticoncentration_probe(RADEMACHER, [1.0, 0.01], min_weight=0.1)


# ---------------------------------------------------------- summaries

def test_mc_mean_examples():
    c = mc_mean(np.full(10, 2.0), variance_bound=0.0, lam=0.1)
    assert c.mean == 2.0 and c.se == 0.0 and c.chebyshev == 0.0
    x = np.random.default_rng(2).integers(0, 2, 10**4)
    b = mc_mean(x, variance_bound=0.25, lam=0.05)
    assert b.chebyshev == pytest.approx(0.01)
    assert abs(b.mean - 0.5) < 0.05
    bounds = [mc_mean(np.zeros(m), variance_bound=1.0, lam=0.5).chebyshev for m in (10, 20, 40)]
    assert bounds[0] > bounds[1] > bounds[2]
    with pytest.raises(MCError):
        mc_mean([])


def test_slope_fit_exact_line():
    ns = 2.0 ** np.arange(8, 15)
    f = slope_fit(ns, 0.7 * np.log(ns) + 1.25)
    assert f.slope == pytest.approx(0.7, rel=1e-12) and f.intercept == pytest.approx(1.25, rel=1e-12)
    assert np.allclose(f.residuals, 0, atol=1e-12)
    assert np.allclose(f.pairwise, 0.7, rtol=1e-12)
    with pytest.raises(MCError):
        slope_fit([2, 4], [1, 2])


def test_universality_gap_independent_streams():
    pts = universality_gap(kac(), G, G, [8], [400], root_seed=91)
    # same atom on different streams: a pure-noise gap
    assert pts[0].first.estimate != pts[0].second.estimate
    assert abs(pts[0].gap) <= 4 * pts[0].se
