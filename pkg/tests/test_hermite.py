import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptflab.hermite import (
    HermiteExpansion,
    derivative_norm_check,
    derivative_norm_direct,
    expand,
    gaussian_expectation,
    gaussian_moment,
    gaussian_norm,
    harmonic_part,
    hermite_1d,
    reconstruct,
)
from ptflab.poly import Poly, gaussian_l2, random_poly

from conftest import brute_gaussian_moment


def x(i, n=1):
    return Poly.var(i, n)


def H(a, n):
    """Tensor Hermite basis element as a Poly over n variables."""
    out = Poly.const(1.0, n)
    for i, k in enumerate(a):
        h = hermite_1d(k)
        out = out * Poly(n, {(i,) * len(key): c for key, c in h.terms.items()})
    return out


class TestHermite1d:
    def test_low_degrees(self):
        assert hermite_1d(0) == Poly.const(1.0, 1)
        assert hermite_1d(1) == x(0)
        assert hermite_1d(2).allclose((x(0) ** 2 - 1) / math.sqrt(2), 1e-14)

    def test_derivative_relation(self):
        for k in range(1, 12):
            assert hermite_1d(k).derivative(0).allclose(hermite_1d(k - 1) * math.sqrt(k), 1e-9)

    def test_too_large(self):
        with pytest.raises(ValueError):
            hermite_1d(31)

    def test_matches_numpy_probabilists(self):
        # He_k / sqrt(k!) from numpy's independent implementation
        from numpy.polynomial import hermite_e

        t = np.linspace(-3, 3, 13)
        for k in range(15):
            ref = hermite_e.hermeval(t, [0] * k + [1]) / math.sqrt(math.factorial(k))
            np.testing.assert_allclose(hermite_1d(k).eval_batch(t[:, None]), ref, rtol=1e-9, atol=1e-9)


def test_gaussian_moments():
    for e in range(12):
        assert gaussian_moment(e) == brute_gaussian_moment(e)


def test_orthonormality():
    n = 3
    idx = [a for a in itertools.product(range(7), repeat=n) if sum(a) <= 6]
    basis = {a: H(a, n) for a in idx}
    rng = np.random.default_rng(1)
    # all diagonal pairs plus a random sample of off-diagonal pairs
    pairs = [(a, a) for a in idx] + [tuple(idx[j] for j in rng.choice(len(idx), 2, replace=False)) for _ in range(300)]
    for a, b in pairs:
        val = gaussian_expectation(basis[a] * basis[b])
        assert abs(val - (a == b)) < 1e-10, (a, b, val)


class TestExpand:
    def test_examples(self):
        h = expand(x(0) ** 2)
        assert h.coefficient((2,)) == pytest.approx(math.sqrt(2))
        assert h.coefficient(()) == pytest.approx(1.0)
        assert expand(x(0, 2) * x(1, 2)).coeffs == {(1, 1): 1.0}
        assert expand(Poly.const(5.0, 1)).coeffs == {(): 5.0}

    def test_trailing_zero_keys(self):
        h = HermiteExpansion(3, {(1, 0, 0): 2.0, (1,): 1.0})
        assert h.coeffs == {(1,): 3.0}

    @pytest.mark.parametrize("seed", range(6))
    def test_parseval_and_round_trip(self, seed):
        p = random_poly(3, 5, np.random.default_rng(seed))
        h = expand(p)
        direct = gaussian_expectation(p * p)
        assert h.l2_squared() == pytest.approx(direct, rel=1e-9)
        back = reconstruct(h)
        assert back.allclose(p, 1e-10)
        h2 = expand(back)
        for a in set(h.coeffs) | set(h2.coeffs):
            assert abs(h.coefficient(a) - h2.coefficient(a)) < 1e-10

    def test_coefficients_are_inner_products(self, rng):
        p = random_poly(2, 4, rng)
        h = expand(p)
        for a in itertools.product(range(5), repeat=2):
            if sum(a) <= 4:
                assert h.coefficient(a) == pytest.approx(gaussian_expectation(p * H(a, 2)), abs=1e-10)

    def test_degree_matches(self, rng):
        p = random_poly(3, 4, rng)
        assert expand(p).degree == p.degree


class TestHarmonicPart:
    def test_examples(self):
        p = x(0) ** 2
        assert harmonic_part(p, 0) == Poly.const(1.0, 1)
        assert harmonic_part(p, 2).allclose(x(0) ** 2 - 1, 1e-12)
        assert harmonic_part(p, 5).is_zero()
        q = x(0, 3) * x(1, 3) - 2 * x(1, 3) * x(2, 3)
        assert harmonic_part(q, 2).allclose(q, 1e-14)

    @pytest.mark.parametrize("seed", range(4))
    def test_parts_sum_and_are_orthogonal(self, seed):
        p = random_poly(3, 4, np.random.default_rng(seed))
        parts = [harmonic_part(p, k) for k in range(5)]
        total = parts[0]
        for q in parts[1:]:
            total = total + q
        assert total.allclose(p, 1e-10)
        for i, j in itertools.combinations(range(5), 2):
            assert abs(gaussian_expectation(parts[i] * parts[j])) < 1e-9
        assert sum(gaussian_l2(q) ** 2 for q in parts) == pytest.approx(gaussian_l2(p) ** 2, rel=1e-9)


class TestDerivativeNorm:
    def test_examples(self):
        lhs, rhs = derivative_norm_check(hermite_1d(2), 1)
        assert lhs == pytest.approx(2) and rhs == pytest.approx(2)
        lhs, rhs = derivative_norm_check(x(0) ** 2, 1)
        assert lhs == pytest.approx(4) and rhs == pytest.approx(6)
        assert derivative_norm_check(x(0), 1) == pytest.approx((1, 1))

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            derivative_norm_check(x(0), 2)

    @pytest.mark.parametrize("seed", range(4))
    def test_harmonic_equality_and_direct_agreement(self, seed):
        rng = np.random.default_rng(seed)
        p = random_poly(3, 4, rng)
        top = harmonic_part(p, 4)
        for k in (1, 2, 3):
            lhs, rhs = derivative_norm_check(p, k)
            assert lhs <= rhs + 1e-9
            assert lhs == pytest.approx(derivative_norm_direct(p, k), rel=1e-9)
            lt, rt = derivative_norm_check(top, k)
            assert lt == pytest.approx(rt, rel=1e-9)


def test_gaussian_norm_values():
    assert gaussian_norm(x(0), 4) == pytest.approx(3 ** 0.25)
    with pytest.raises(ValueError):
        gaussian_norm(x(0), 3)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.integers(0, 5))
def test_expand_reconstruct_property(seed, n, d):
    p = random_poly(n, d, np.random.default_rng(seed))
    assert reconstruct(expand(p)).allclose(p, 1e-10)
