import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randroots import calibration
from randroots.coeff_profiles import GeneralizedPolynomial, hyperbolic, kac, kac_derivative, power_law
from randroots.variance_kernel import (
    KernelError,
    VarianceKernel,
    b_coeff,
    eval_f_infinity,
    f_binomial,
    f_binomial_recursion,
    f_reciprocal,
    f_reciprocal_recursion,
)

PROFILES = [kac(), hyperbolic(0.5), hyperbolic(4.0), kac_derivative(1), power_law(0.5, 2.0)]


def kern(profile, n):
    return VarianceKernel.from_profile(profile, n)


@pytest.mark.parametrize("n", [1, 5, 50, 1000])
def test_kac_geometric_oracle(n):
    f, logf = kern(kac(), n).eval_f(0.5)
    assert f == pytest.approx(2 * (1 - 2.0 ** (-(n + 1))), rel=1e-15)
    assert logf == pytest.approx(math.log(f), rel=1e-15)


@pytest.mark.parametrize("profile", PROFILES)
def test_value_at_zero(profile):
    k = kern(profile, 20)
    assert k.eval_f(0.0)[0] == pytest.approx(k.values[0] ** 2, rel=1e-15)


def test_kac_n2_derivatives_at_one():
    assert kern(kac(), 2).eval_f_derivs(1.0) == pytest.approx((3.0, 3.0, 2.0), rel=1e-15)


def test_first_derivative_central_difference():
    k = kern(hyperbolic(2.5), 40)
    h = 1e-6
    fd = (k.eval_f(0.7 + h)[0] - k.eval_f(0.7 - h)[0]) / (2 * h)
    assert k.eval_f_derivs(0.7)[1] == pytest.approx(fd, rel=1e-6)


@given(st.sampled_from(PROFILES), st.integers(2, 300), st.floats(-4, -0.05))
def test_five_point_differences(profile, n, logx):
    k = kern(profile, n)
    x = math.exp(logx)
    # f varies on the scale x / E_w[k]; E_w[k] = x g'(x)
    h = 2e-3 * x / (1.0 + x * k.log_derivs(x)[1])
    xs = x + h * np.arange(-2, 3)
    f = k.eval_f(xs)[0]
    d1 = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h)
    d2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)
    _, f1, f2 = k.eval_f_derivs(x)
    # absolute slack covers the rounding floor of the stencils (f'' = 0 for linear f)
    eps = np.finfo(float).eps
    assert f1 == pytest.approx(d1, rel=1e-6, abs=100 * eps * f[2] / h)
    assert f2 == pytest.approx(d2, rel=1e-6, abs=100 * eps * f[2] / h ** 2)


@given(st.floats(0.1, 10.0))
def test_hyperbolic_log_derivative_at_zero(L):
    g = kern(hyperbolic(L), 30).log_derivs(0.0)
    assert g[1] == pytest.approx(L, rel=1e-13)


@given(st.sampled_from(PROFILES), st.floats(1e-3, 1e3), st.floats(0.0, 1.5))
def test_scaling_invariance(profile, lam, x):
    k = kern(profile, 64)
    ks = k.scaled(lam)
    f = np.array(k.eval_f_derivs(x))
    fs = np.array(ks.eval_f_derivs(x))
    assert np.allclose(fs, lam ** 2 * f, rtol=1e-12, atol=0)
    g = k.log_derivs(x)
    gs = ks.log_derivs(x)
    assert gs[1] == pytest.approx(g[1], rel=1e-12)
    assert gs[2] == pytest.approx(g[2], rel=1e-12, abs=1e-12 * abs(g[1]) ** 2)


@given(st.sampled_from(PROFILES), st.integers(1, 500), st.floats(0.0, 4.0))
def test_positivity_and_log_variance(profile, n, x):
    k = kern(profile, n)
    assert k.eval_f(x)[0] > 0
    assert k.log_variance_combination(x) >= 0


def test_negative_x_rejected():
    with pytest.raises(KernelError):
        kern(kac(), 3).eval_f(-0.1)


def test_f_binomial_geometric():
    for n in (0, 3, 40):
        for x in (-0.9, 0.2, 0.95):
            assert f_binomial(n, 1.0, x) == pytest.approx((1 - x ** (n + 1)) / (1 - x), rel=1e-14)


@pytest.mark.parametrize("n,L", [(5, 1), (10, 3), (50, 2)])
def test_f_binomial_at_one_is_hockey_stick(n, L):
    assert f_binomial(n, float(L), 1.0) == pytest.approx(math.comb(n + L, n), rel=1e-13)
    assert b_coeff(n, float(L + 1)) == pytest.approx(math.comb(n + L, n), rel=1e-13)


def test_recursion_example():
    f = f_binomial(50, 2.5, 0.9)
    assert abs(f - f_binomial_recursion(50, 2.5, 0.9)) <= 1e-12 * abs(f)
    with pytest.raises(KernelError):
        f_binomial_recursion(5, 2.0, 1.0)


@given(st.integers(0, 200), st.floats(0.01, 1.0), st.floats(-1.0, 0.0))
def test_alternating_sum_bounded(n, L, x):
    # b_{k,L} is non-increasing in k only for L <= 1, so the terms alternate with decreasing modulus
    assert abs(f_binomial(n, L, x)) <= 1.0 + 1e-12


def test_alternating_bound_fails_above_one():
    # f_{1,3}(-1) = 1 - 3
    assert f_binomial(1, 3.0, -1.0) == pytest.approx(-2.0)


def test_f_reciprocal_examples():
    for n in (1, 7, 64):
        x = 0.6
        assert f_reciprocal(n, 1.0, x) == pytest.approx((1 - x ** (n + 1)) / (1 - x), rel=1e-14)
        assert f_reciprocal(n, 2.5, 0.0) == 1.0
    with pytest.raises(KernelError):
        f_reciprocal(5, 0.0, 0.5)
    with pytest.raises(KernelError):
        f_reciprocal(5, -2.0, 0.5)


@given(st.integers(1, 200), st.sampled_from([0.5, 1.0, 2.0, 3.5, 7.0]), st.floats(0.0, 0.999))
def test_reciprocal_recursion(n, L, x):
    a = f_reciprocal(n, L, x)
    b = f_reciprocal_recursion(n, L, x)
    assert abs(a - b) <= 1e-11 * max(abs(a), abs(b))


def test_f_reciprocal_matches_definition():
    # x^n f_{n,L}(1/x) / b_{n,L} from the direct binomial sum
    for n, L, x in [(10, 2.0, 0.5), (30, 3.5, 0.8)]:
        direct = x ** n * f_binomial(n, L, 1 / x) / b_coeff(n, L)
        assert f_reciprocal(n, L, x) == pytest.approx(direct, rel=1e-12)


def test_f_infinity():
    h = GeneralizedPolynomial(((3.0, 1.0),))
    x = np.array([0.0, 0.3, 0.9])
    f0, f1, f2 = eval_f_infinity(h, [], x)
    assert np.allclose(f0, (1 - x) ** -3.0, rtol=1e-15)
    assert np.allclose(f1, 3 * (1 - x) ** -4.0, rtol=1e-15)
    assert np.allclose(f2, 12 * (1 - x) ** -5.0, rtol=1e-15)
    kac_h = GeneralizedPolynomial(((1.0, 1.0),))
    assert eval_f_infinity(kac_h, [], np.array([0.75]))[0][0] == pytest.approx(4.0, rel=1e-15)
    with pytest.raises(KernelError):
        eval_f_infinity(kac_h, [], np.array([1.0]))


@pytest.mark.parametrize("L", [1.0, 2.0, 4.0])
def test_ratio_to_limit_converges_monotonically(L):
    k0 = kern(hyperbolic(L), 1)
    resid = []
    for j in range(6, 15):
        k = kern(hyperbolic(L), 2 ** j)
        f = k.eval_f(0.9)[0]
        finf = eval_f_infinity(k0.limit.h, k0.limit.head, np.array([0.9]))[0][0]
        resid.append(abs(f / finf - 1.0))
    assert all(b <= a for a, b in zip(resid, resid[1:]))
    assert resid[-1] < 1e-12


def test_reciprocal_kernel_reverses_coefficients():
    k = kern(hyperbolic(3.0), 12)
    r = k.reciprocal()
    assert np.allclose(r.values, k.values[::-1] / k.values[-1], rtol=1e-14)


# tail bounds with the constants frozen in the packaged fixture

FROZEN = calibration.load_frozen()


@pytest.mark.parametrize("n", [2 ** j for j in range(8, 15)])
def test_tail_series_bound_with_frozen_constant(n):
    bound = FROZEN["tail_series"]["C"] * FROZEN["headroom"]
    for L in calibration.TAIL_LS:
        assert calibration.tail_ratios(n, L, calibration.tail_grid(n)).max() <= bound


@pytest.mark.parametrize("n", [2 ** j for j in range(8, 15)])
def test_reciprocal_bound_with_frozen_constant(n):
    bound = FROZEN["reciprocal"]["C"] * FROZEN["headroom"]
    for L in calibration.RECIP_LS:
        assert calibration.recip_ratios(n, L, calibration.recip_grid(n)).max() <= bound
