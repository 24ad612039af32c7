import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randroots.coeff_profiles import (
    GeneralizedPolynomial,
    ProfileError,
    binom_coeff_log,
    classical_degree,
    coeff_sequence,
    eval_genpoly,
    explicit,
    generalized_form,
    genpoly_sqrt,
    hyperbolic,
    kac,
    kac_derivative,
    parse_profile,
    power_law,
    read_csv_values,
)


def rising_ratio(L, k):
    """Exact L(L+1)...(L+k-1)/k! over the rationals (L rational)."""
    L = Fraction(L)
    out = Fraction(1)
    for j in range(k):
        out *= (L + j) / (j + 1)
    return out


def test_binom_coeff_log_examples():
    assert binom_coeff_log(1.0, 17) == 0.0
    assert binom_coeff_log(3.7, 0) == 0.0
    assert binom_coeff_log(2.0, 3) == pytest.approx(math.log(4.0), rel=1e-15)


@given(st.fractions(min_value=Fraction(1, 8), max_value=20, max_denominator=16), st.integers(0, 200))
def test_binom_coeff_log_matches_exact_product(L, k):
    exact = rising_ratio(L, k)
    expected = math.log(exact.numerator) - math.log(exact.denominator)
    assert binom_coeff_log(float(L), k) == pytest.approx(expected, rel=1e-12, abs=1e-12)


@given(st.floats(1.01, 30), st.integers(0, 300))
def test_binom_coeff_log_increasing_for_L_above_one(L, k):
    assert binom_coeff_log(L, k + 1) > binom_coeff_log(L, k)


@pytest.mark.parametrize("L,k", [(0.0, 3), (-1.0, 2), (2.0, 1.5), (2.0, -1)])
def test_binom_coeff_log_rejects_bad_input(L, k):
    with pytest.raises(ProfileError):
        binom_coeff_log(L, k)


def test_eval_genpoly_examples():
    one = GeneralizedPolynomial(((1.0, 1.0),))
    assert eval_genpoly(one, 12) == 1.0
    assert one.degree == 0.0
    h = GeneralizedPolynomial(((1.0, -1.0), (2.0, 1.0)))
    assert eval_genpoly(h, 5) == pytest.approx(5.0, rel=1e-14)


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=5).filter(lambda c: c[-1] > 0),
       st.integers(0, 10_000))
def test_monomial_conversion_matches_direct_evaluation(coeffs, k):
    h = GeneralizedPolynomial.from_monomial(coeffs)
    direct = sum(c * k ** j for j, c in enumerate(coeffs))
    scale = sum(abs(c) * k ** j for j, c in enumerate(coeffs))
    assert abs(eval_genpoly(h, k) - direct) <= 1e-12 * max(scale, 1.0)


def test_genpoly_validation():
    with pytest.raises(ProfileError):
        GeneralizedPolynomial(((2.0, 1.0), (1.0, 1.0)))
    with pytest.raises(ProfileError):
        GeneralizedPolynomial(((0.0, 1.0),))
    with pytest.raises(ProfileError):
        GeneralizedPolynomial(((1.0, 1.0), (2.0, 0.0)))


def test_sequence_examples():
    assert np.array_equal(coeff_sequence(hyperbolic(1.0), 8).values, np.ones(9))
    assert np.allclose(coeff_sequence(kac_derivative(1), 4).values, [1, 2, 3, 4], rtol=1e-15)
    assert coeff_sequence(hyperbolic(3.0), 5).values[2] == pytest.approx(math.sqrt(6.0), rel=1e-15)
    assert np.array_equal(coeff_sequence(kac(), 5).values, np.ones(6))
    pl = coeff_sequence(power_law(0.5, 2.0), 4).values
    assert pl[0] == 2.0 and pl[4] == pytest.approx(4.0)


@given(st.floats(0.1, 40), st.integers(1, 300))
def test_hyperbolic_ratio_recursion(L, n):
    c2 = np.exp(2 * coeff_sequence(hyperbolic(L), n).log_abs)
    i = np.arange(n)
    assert np.allclose(c2[:-1] / c2[1:], (i + 1) / (L + i), rtol=1e-12)


@pytest.mark.parametrize("prof", [kac(), hyperbolic(0.5), hyperbolic(4.0), kac_derivative(2),
                                  power_law(-0.25), power_law(1.5, 3.0)])
def test_condition_one_bounds(prof):
    seq = coeff_sequence(prof, 500)
    i = np.arange(len(seq.values), dtype=float)
    tail = i >= max(seq.N0, 1)
    c = np.abs(seq.values[tail])
    assert 0 < seq.tau1 <= seq.tau2 < math.inf
    assert np.all(seq.tau1 * i[tail] ** seq.rho <= c * (1 + 1e-12))
    assert np.all(c <= seq.tau2 * i[tail] ** seq.rho * (1 + 1e-12))


def test_genpoly_sqrt_squares_match_h():
    h = GeneralizedPolynomial(((1.0, -1.0), (2.0, 1.0)))  # h(k) = k
    prof = genpoly_sqrt(h, N0=1, head=(1.0,))
    seq = coeff_sequence(prof, 40)
    assert seq.values[0] == 1.0
    assert np.allclose(seq.values[1:] ** 2, np.arange(1, 41), rtol=1e-13)


def test_profile_errors():
    with pytest.raises(ProfileError):
        hyperbolic(0.0)
    with pytest.raises(ProfileError):
        power_law(-0.5)
    with pytest.raises(ProfileError):
        coeff_sequence(genpoly_sqrt(GeneralizedPolynomial(((1.0, -1.0), (2.0, 1.0)))), 5)  # h(0) = 0
    with pytest.raises(ProfileError):
        coeff_sequence(explicit([1.0, 2.0]), 3)
    with pytest.raises(ProfileError):
        parse_profile("nope")


@pytest.mark.parametrize("prof", [kac(), hyperbolic(2.5), kac_derivative(3), power_law(0.5, 2.0),
                                  genpoly_sqrt(GeneralizedPolynomial(((1.0, 1.0), (3.0, 2.0)))),
                                  explicit([1.0, -2.0, 3.0])])
def test_profile_dict_round_trip(prof):
    assert parse_profile(prof.to_dict()) == prof
    assert parse_profile(json.dumps(prof.to_dict())) == prof


def test_compact_strings(tmp_path):
    assert parse_profile("hyperbolic:L=4") == hyperbolic(4.0)
    assert parse_profile("kac_derivative:d=1") == kac_derivative(1)
    p = parse_profile("genpoly_sqrt:terms=1:-1;2:1,N0=1")
    assert p.N0 == 1 and p.h.terms == ((1.0, -1.0), (2.0, 1.0))
    f = tmp_path / "c.csv"
    f.write_text("c\n1\n2.5\n-3\n")
    assert read_csv_values(f) == [1.0, 2.5, -3.0]
    assert parse_profile(f"explicit:{f}").values == (1.0, 2.5, -3.0)


def test_generalized_forms():
    h, N0, head = generalized_form(kac_derivative(1))
    assert N0 == 0 and len(head) == 0
    assert [eval_genpoly(h, k) for k in range(6)] == pytest.approx([(k + 1) ** 2 for k in range(6)])
    assert h.degree == 2.0
    with pytest.raises(ProfileError):
        generalized_form(explicit([1.0, 2.0]))
    assert classical_degree(kac()) == 0
    assert classical_degree(hyperbolic(2.0)) is None
    assert classical_degree(kac_derivative(2)) == 2


def test_growth_exponents():
    assert hyperbolic(5.0).growth_exponent == 2.0
    assert kac_derivative(2).growth_exponent == 2.0
    vals = [1.0] + [i ** 1.5 for i in range(1, 200)]
    assert explicit(vals).growth_exponent == pytest.approx(1.5, rel=1e-12)
