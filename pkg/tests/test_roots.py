import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randroots.atoms import SeedStream, gaussian, sample_atoms
from randroots.roots import (
    Annulus,
    Disk,
    Interval,
    RootError,
    count_in_set,
    disk_counts_certified,
    find_roots,
    jensen_root_bound,
    poly_eval,
    reciprocal_transform,
    taylor_shift,
)


def kac_sample(n, i, seed=0):
    return sample_atoms(gaussian(), SeedStream(seed, (i,)), n + 1)


def test_two_real_roots():
    s = find_roots([-1.0, 0.0, 1.0])
    assert s.n_real == 2
    assert np.allclose(s.real_roots, [-1.0, 1.0], atol=1e-14)


def test_conjugate_pair():
    s = find_roots([1.0, 0.0, 1.0])
    assert s.n_real == 0 and s.n_pairs == 1
    assert np.allclose(sorted(s.roots.imag), [-1.0, 1.0], atol=1e-14)
    assert s.partner[s.partner[0]] == 0


def test_double_root_with_pair():
    # (x - 1)^2 (x^2 + x + 1) = x^4 - x^3 - x + 1
    s = find_roots([1.0, -1.0, 0.0, -1.0, 1.0])
    assert s.n_real == 2 and s.n_pairs == 1
    assert np.allclose(s.real_roots, 1.0, atol=1e-6)
    assert count_in_set(s, Interval(0.9, 1.1)) == 2


def test_linear_and_reciprocal():
    s = find_roots([-1.0, 2.0])
    assert s.real_roots[0] == pytest.approx(0.5, rel=1e-15)
    q = reciprocal_transform([-1.0, 2.0])
    assert np.allclose(q, [1.0, -0.5])
    assert find_roots(q).real_roots[0] == pytest.approx(2.0, rel=1e-15)


def test_zero_roots_and_leading_zeros():
    s = find_roots([0.0, 0.0, 1.0, 1.0])
    assert s.effective_degree == 3
    assert np.count_nonzero(s.roots == 0) == 2
    t = find_roots([-1.0, 1.0, 0.0, 0.0])
    assert t.effective_degree == 1 and t.degree == 3
    with pytest.raises(RootError):
        find_roots([0.0, 0.0])
    with pytest.raises(RootError):
        find_roots([1.0, math.nan])


@given(st.integers(1, 120), st.integers(0, 10**6))
def test_vieta_and_pairing(n, i):
    a = kac_sample(n, i, seed=11)
    s = find_roots(a, seed_path=(i,))
    assert not s.degenerate
    assert np.sum(s.roots).real == pytest.approx(-a[-2] / a[-1], rel=1e-7, abs=1e-7 * n * abs(a).max() / abs(a[-1]))
    assert (n - s.n_real) % 2 == 0
    pairs = np.flatnonzero(~s.is_real)
    assert np.allclose(s.roots[s.partner[pairs]], np.conj(s.roots[pairs]), rtol=1e-9, atol=1e-12)
    assert s.residuals.max() <= 1e-12


def test_complex_coefficients():
    a = np.array([1.0 + 2.0j, -0.5j, 3.0, 1.0 - 1.0j])
    s = find_roots(a)
    assert np.abs(poly_eval(a, s.roots)).max() <= 1e-12 * np.abs(a).sum() * 10
    assert s.n_real == 0


def test_count_in_set_examples():
    s = find_roots([-1.0, 0.0, 1.0])
    assert count_in_set(s, Interval(-math.inf, math.inf)) == 2
    assert count_in_set(s, Interval(0.0, 1.0)) == 1
    assert count_in_set(s, Interval(1.0, 2.0)) == 1  # closed endpoint
    assert count_in_set(s, Disk(0.0, 0.5)) == 0
    assert count_in_set(s, Annulus(0.0, 0.5, 1.5)) == 2
    with pytest.raises(RootError):
        Interval(1.0, 0.0)


@given(st.integers(2, 60), st.integers(0, 10**6))
def test_reciprocal_maps_roots(n, i):
    a = kac_sample(n, i, seed=13)
    z = find_roots(a, classify=False).roots
    w = find_roots(reciprocal_transform(a), classify=False).roots
    inv = np.sort_complex(np.round(1 / z, 6))
    got = np.sort_complex(np.round(w, 6))
    # match every 1/z to its nearest reciprocal-polynomial root
    d = np.abs(inv[:, None] - got[None, :]).min(axis=1)
    assert np.all(d <= 1e-8 * np.maximum(1.0, np.abs(inv)) + 2e-6)


def test_jensen_examples():
    assert jensen_root_bound([1.0], 0.0, 0.5, 1.0) == pytest.approx(0.0, abs=1e-15)
    b = jensen_root_bound([-0.25, 0.0, 1.0], 0.0, 0.6, 2.0)
    assert b == pytest.approx(math.log(4.25 / 0.25) / math.log(2 / 0.6), rel=1e-12)
    assert b >= 2
    with pytest.raises(RootError):
        jensen_root_bound([0.0, 1.0], 0.0, 0.5, 1.0)
    with pytest.raises(RootError):
        jensen_root_bound([1.0, 1.0], 0.0, 1.0, 0.5)


def test_jensen_bounds_counts():
    for i in range(1000):
        a = kac_sample(32, i, seed=17)
        s = find_roots(a, seed_path=(i,))
        assert jensen_root_bound(a, 0.9, 0.05, 0.09) >= count_in_set(s, Disk(0.9, 0.05)) - 1e-12


def test_taylor_shift():
    a = np.array([1.0, -3.0, 0.0, 2.0])
    t = taylor_shift(a, 0.7)
    w = np.linspace(-1, 1, 7)
    assert np.allclose(poly_eval(t, w), poly_eval(a, 0.7 + w), rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("n", [16, 128])
def test_certified_counts_match_solver(n):
    radii = [0.2, 0.05, 0.01]
    for i in range(50):
        a = kac_sample(n, i, seed=19)
        s = find_roots(a, seed_path=(i,))
        counts, methods = disk_counts_certified(a, 0.95, radii)
        assert counts == [count_in_set(s, Disk(0.95, r)) for r in radii]
        assert set(methods) <= {"pellet", "winding", "solve"}
