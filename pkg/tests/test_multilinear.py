import numpy as np
import pytest

from ptflab.analysis.multilinear import a_operator, composition_derivative_expansion, composition_subset_expansion
from ptflab.poly import Poly, compose, multilinearize, random_poly


def x(i, n):
    return Poly.var(i, n)


def L(p):
    return multilinearize(p).to_poly()


class TestAOperator:
    def test_single_multilinear_argument_vanishes(self, rng):
        assert a_operator([x(0, 1)]).is_zero()
        for _ in range(5):
            assert a_operator([random_poly(4, 3, rng, "multilinear")]).is_zero()

    def test_square_of_variable(self):
        assert a_operator([x(0, 1), x(0, 1)]).allclose(1 - x(0, 1) ** 2, 1e-14)

    def test_empty_is_one(self):
        assert a_operator([], n=2) == Poly.const(1.0, 2)

    def test_two_argument_formula(self, rng):
        # A(p, q) = L(pq) - p L(q) - q L(p) + pq
        p = random_poly(3, 2, rng, "multilinear").to_poly()
        q = random_poly(3, 2, rng, "multilinear").to_poly()
        expected = L(p * q) - p * L(q) - q * L(p) + p * q
        assert a_operator([p, q]).allclose(expected, 1e-12)

    def test_disjoint_supports_vanish(self):
        # L is multiplicative on products of polynomials in disjoint variables
        assert a_operator([x(0, 3) * x(1, 3), x(2, 3)]).is_zero()

    def test_too_many_arguments(self):
        with pytest.raises(ValueError):
            a_operator([x(0, 1)] * 5)


class TestCompositionIdentity:
    def test_worked_instance(self):
        h = Poly(2, {(0, 1): 1.0})
        qs = [x(0, 2), x(0, 2) + x(1, 2)]
        target = L(compose(h, qs))
        assert composition_subset_expansion(h, qs).allclose(target, 1e-12)
        assert composition_derivative_expansion(h, qs).allclose(target, 1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_instances(self, seed):
        rng = np.random.default_rng(seed)
        m = 1 + seed % 3
        h = random_poly(m, 3, rng)
        qs = [random_poly(4, 2, rng, "multilinear") for _ in range(m)]
        target = L(compose(h, [q.to_poly() for q in qs]))
        assert composition_subset_expansion(h, qs).allclose(target, 1e-12)
        assert composition_derivative_expansion(h, qs, "factorial").allclose(target, 1e-12)

    def test_unnormalised_display_overcounts(self):
        h = Poly(1, {(0, 0): 1.0})
        qs = [x(0, 2) + x(1, 2)]
        target = L(compose(h, qs))
        assert not composition_derivative_expansion(h, qs, "none").allclose(target, 1e-6)

    def test_errors(self):
        with pytest.raises(ValueError):
            composition_subset_expansion(Poly.var(0, 2), [x(0, 1)])
        with pytest.raises(ValueError):
            composition_derivative_expansion(Poly.var(0, 1), [x(0, 1)], "other")
        with pytest.raises(ValueError):
            composition_derivative_expansion(Poly(1, {(0,) * 5: 1.0}), [x(0, 1)])
