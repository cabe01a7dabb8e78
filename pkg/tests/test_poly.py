import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import chebyshev as C
from numpy.polynomial import polynomial as P

from blockc.poly import (
    PolySpec,
    chebyshev_coeffs,
    gqet_norm,
    l1_norm,
    linf_norm,
    split_parity,
)

coeff = st.floats(-2, 2, allow_nan=False).map(lambda c: round(c, 6))
polys = st.lists(coeff, min_size=1, max_size=9).map(PolySpec)
alphas = st.floats(0.1, 3.0)


def brute_sup(p: PolySpec, alpha: float, n: int = 200_001) -> float:
    x = np.linspace(-1, 1, n)
    return float(np.max(np.abs(P.polyval(alpha * x, p.coeffs)))) if p.coeffs else 0.0


def test_trailing_zeros_trimmed():
    p = PolySpec([1.0, 2.0, 0.0, 1e-14])
    assert p.coeffs == (1.0, 2.0)
    assert p.degree == 1
    assert PolySpec([0.0, 0.0]).degree == -1


@pytest.mark.parametrize(
    "coeffs, parity",
    [([0.0, 1.0], "odd"), ([1.0, 0.0, 2.0], "even"), ([1.0, 1.0], "mixed"), ([], "even")],
)
def test_parity(coeffs, parity):
    assert PolySpec(coeffs).parity == parity


def test_l1_norm_hand_values():
    # 1 * 2**2 + 0.25 * 2**4
    assert l1_norm(PolySpec([0, 0, 1.0, 0, -0.25]), 2.0) == 8.0
    assert l1_norm(PolySpec([-3.0]), 5.0) == 3.0


def test_linf_of_regression_poly():
    # p(2x) = 4x^2 - 4x^4 peaks at x^2 = 1/2 with value 1
    assert linf_norm(PolySpec([0, 0, 1.0, 0, -0.25]), 2.0) == pytest.approx(1.0, abs=1e-12)


def test_linf_chebyshev_is_one():
    for n in (2, 7, 30):
        t = PolySpec(C.cheb2poly([0] * n + [1]))
        assert linf_norm(t, 1.0) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(polys, alphas)
def test_linf_matches_dense_grid(p, alpha):
    sup = linf_norm(p, alpha)
    # the grid can only under-estimate the true maximum
    assert sup >= brute_sup(p, alpha) - 1e-9
    assert sup <= brute_sup(p, alpha) + 1e-6 * max(1.0, sup)


@settings(max_examples=100, deadline=None)
@given(polys, alphas)
def test_linf_bounded_by_l1(p, alpha):
    assert linf_norm(p, alpha) <= l1_norm(p, alpha) + 1e-9


@settings(max_examples=100, deadline=None)
@given(polys)
def test_exact_chebyshev_conversion_matches_numpy(p):
    ref = C.poly2cheb(p.coeffs) if p.coeffs else np.zeros(1)
    got = chebyshev_coeffs(p)
    np.testing.assert_allclose(got, ref, atol=1e-12)


def test_chebyshev_conversion_is_exact_at_high_degree():
    t30 = PolySpec(C.cheb2poly([0] * 30 + [1]))
    cheb = chebyshev_coeffs(t30)
    expected = np.zeros(31)
    expected[30] = 1.0
    np.testing.assert_array_equal(cheb, expected)
    x = np.linspace(-1, 1, 201)
    np.testing.assert_allclose(t30(x), np.cos(30 * np.arccos(x)), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(polys)
def test_split_parity_sums_back(p):
    even, odd = split_parity(p)
    assert (even + odd).coeffs == p.coeffs
    assert even.parity == "even"
    assert odd.parity in ("odd", "even")


@settings(max_examples=50, deadline=None)
@given(polys, polys)
def test_compose_evaluates_pointwise(p, q):
    x = np.linspace(-0.9, 0.9, 11)
    lhs = P.polyval(x, p.compose(q).coeffs) if not p.compose(q).is_zero else 0 * x
    rhs = P.polyval(P.polyval(x, q.coeffs) if q.coeffs else 0 * x, p.coeffs) if p.coeffs else 0 * x
    np.testing.assert_allclose(lhs, rhs, atol=1e-8 * (1 + np.max(np.abs(rhs))))


def test_normalized_keeps_chebyshev_cancellation():
    t30 = PolySpec(C.cheb2poly([0] * 30 + [1]))
    q = t30.normalized(1.0, 1.0 + 1e-14)
    assert linf_norm(q, 1.0) <= 1.0


def gqet_brute(p: PolySpec, alpha: float) -> float:
    cheb = C.poly2cheb(P.polyval(0, [0]) + np.array(p.scaled(alpha).coeffs))
    z = np.exp(1j * np.linspace(0, 2 * np.pi, 100_001))
    return float(np.max(np.abs(P.polyval(z, cheb))))


@settings(max_examples=40, deadline=None)
@given(polys.filter(lambda p: not p.is_zero), alphas)
def test_gqet_norm_matches_circle_grid(p, alpha):
    assert gqet_norm(p, alpha) == pytest.approx(gqet_brute(p, alpha), rel=1e-6, abs=1e-9)


def test_gqet_norm_dominates_linf():
    # the unit circle contains the images of [-1, 1] under x = (z + 1/z) / 2
    p = PolySpec([0.3, -1.0, 0.0, 0.5])
    assert gqet_norm(p, 1.0) >= linf_norm(p, 1.0) - 1e-12
