import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randroots.quadrature import KRONROD_WEIGHTS, NODES, gk15, integrate, integrate_mapped


def test_rule_weights():
    assert KRONROD_WEIGHTS.sum() == pytest.approx(2.0, rel=1e-15)
    assert np.allclose(NODES, -NODES[::-1], atol=0)


@given(st.integers(0, 21))
def test_kronrod_exact_for_low_degree(p):
    k, _ = gk15(lambda x: x ** p, [0.0], [1.0])
    assert k[0] == pytest.approx(1.0 / (p + 1), rel=1e-14)


@pytest.mark.parametrize("func,a,b,exact", [
    (np.sin, 0.0, math.pi, 2.0),
    (np.exp, -1.0, 2.0, math.exp(2) - math.exp(-1)),
    (lambda x: np.sqrt(x), 0.0, 1.0, 2.0 / 3.0),
    (lambda x: 1.0 / (1.0 + x * x), -5.0, 5.0, 2 * math.atan(5.0)),
])
def test_known_integrals(func, a, b, exact):
    r = integrate(func, a, b, rtol=1e-12)
    assert r.converged
    assert r.value == pytest.approx(exact, rel=1e-10)


def test_breakpoints_and_reversed_limits():
    f = lambda x: np.abs(x - 0.3)  # noqa: E731
    r = integrate(f, 0.0, 1.0, points=(0.3,), rtol=1e-13)
    assert r.value == pytest.approx(0.045 + 0.245, rel=1e-13)
    assert integrate(np.exp, 1.0, 0.0).value == pytest.approx(-(math.e - 1), rel=1e-12)
    assert integrate(np.exp, 2.0, 2.0).value == 0.0


def test_mapped_infinite_limits():
    cauchy = lambda t: 1.0 / (1.0 + t * t)  # noqa: E731
    assert integrate_mapped(cauchy, -math.inf, math.inf, rtol=1e-12).value == pytest.approx(math.pi, rel=1e-10)
    assert integrate_mapped(cauchy, 0.0, math.inf, rtol=1e-12).value == pytest.approx(math.pi / 2, rel=1e-10)
    gauss = lambda t: np.exp(-t * t)  # noqa: E731
    assert integrate_mapped(gauss, -math.inf, 0.0, rtol=1e-12).value == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-10)


def test_errors():
    with pytest.raises(FloatingPointError), np.errstate(divide="ignore"):
        integrate(lambda x: 1.0 / x, -1.0, 1.0)
    with pytest.raises(ValueError):
        integrate(np.exp, 0.0, math.inf)


def test_depth_cap_reports_nonconvergence():
    r = integrate(lambda x: np.abs(x) ** -0.9, 0.0, 1.0, rtol=1e-14, max_depth=5)
    assert not r.converged
