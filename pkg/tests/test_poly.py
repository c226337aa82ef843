import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptflab.hermite import expand
from ptflab.poly import (
    MultilinearPoly,
    Poly,
    bernoulli_moment,
    compose,
    evaluate,
    from_json,
    gaussian_l2,
    influence,
    influence_by_restriction,
    is_tau_regular,
    multilinearize,
    random_poly,
    restrict,
    to_json,
)

from conftest import all_vertices


def x(i, n):
    return Poly.var(i, n)


class TestEvaluate:
    def test_examples(self):
        assert evaluate(x(0, 2) * x(1, 2), [1, -1]) == -1
        assert evaluate(x(0, 2) ** 2 - 1, [1, 123.0]) == 0
        assert evaluate(3 * x(0, 2) * x(1, 2) - x(0, 2), [-1, -1]) == 4

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            evaluate(x(0, 2), [1.0])

    def test_batch_matches_pointwise(self, rng):
        p = random_poly(4, 3, rng)
        X = rng.standard_normal((20, 4))
        np.testing.assert_allclose(p.eval_batch(X), [evaluate(p, r) for r in X], rtol=1e-12, atol=1e-12)

    def test_canonical_form_drops_zeros(self):
        p = x(0, 2) - x(0, 2) + 0 * x(1, 2)
        assert p.is_zero() and p.terms == {}


class TestMultilinearize:
    def test_examples(self):
        assert multilinearize(x(0, 1) ** 2) == MultilinearPoly(1, {0: 1.0})
        p = x(0, 2) ** 3 - 3 * x(0, 2) * x(1, 2)
        assert multilinearize(p) == MultilinearPoly.from_sets(2, [((0,), 1.0), ((0, 1), -3.0)])
        q = MultilinearPoly.from_sets(3, [((0, 2), 2.0)])
        assert multilinearize(q) is q

    @pytest.mark.parametrize("seed", range(5))
    def test_vertex_agreement_and_idempotence(self, seed):
        rng = np.random.default_rng(seed)
        p = random_poly(6, 4, rng)
        L = multilinearize(p)
        V = all_vertices(6)
        np.testing.assert_allclose(L.truth_table(), p.eval_batch(V), rtol=1e-9, atol=1e-9)
        assert multilinearize(L.to_poly()).allclose(L, 1e-12)
        assert L.degree <= p.degree

    def test_too_many_variables(self):
        with pytest.raises(ValueError):
            multilinearize(Poly(64, {(63,): 1.0}))


class TestMoments:
    def test_bernoulli_examples(self):
        assert bernoulli_moment(MultilinearPoly(1, {1: 1.0}), 2).value == pytest.approx(1.0)
        p = MultilinearPoly.from_sets(3, [((0, 1), 1.0), ((2,), 1.0)])
        assert bernoulli_moment(p, 2).value == pytest.approx(math.sqrt(2))
        q = MultilinearPoly.from_sets(2, [((0,), 1.0), ((1,), 1.0)])
        assert bernoulli_moment(q, 4).value == pytest.approx(8 ** 0.25)

    def test_exact_mode_cap(self):
        with pytest.raises(ValueError):
            bernoulli_moment(MultilinearPoly(25, {1: 1.0}), 2)

    def test_mc_mode_reports_stderr(self, rng):
        q = MultilinearPoly.from_sets(30, [((0, 29), 1.0), ((3,), 1.0)])
        est = bernoulli_moment(q, 4, mode="mc", samples=40_000, rng=rng)
        assert est.stderr > 0
        assert abs(est.value - 8 ** 0.25) < 5 * est.stderr

    def test_gaussian_l2_examples(self):
        assert gaussian_l2(x(0, 1)) == pytest.approx(1.0)
        assert gaussian_l2(x(0, 1) ** 2) == pytest.approx(math.sqrt(3))
        assert gaussian_l2(x(0, 2) * x(1, 2) + 5) == pytest.approx(math.sqrt(26))

    @pytest.mark.parametrize("seed", range(5))
    def test_l2_agreement_for_multilinear(self, seed):
        p = random_poly(7, 3, np.random.default_rng(seed), "multilinear")
        assert gaussian_l2(p) == pytest.approx(bernoulli_moment(p, 2).value, rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_bernoulli_hypercontractivity(self, seed):
        p = random_poly(6, 3, np.random.default_rng(seed), "multilinear")
        assert bernoulli_moment(p, 4).value <= 3 ** (p.degree / 2) * bernoulli_moment(p, 2).value + 1e-12


class TestInfluence:
    def test_examples(self):
        assert influence(x(0, 2) * x(1, 2), 0) == pytest.approx(1.0)
        p = x(0, 3) * x(1, 3) + 2 * x(2, 3)
        assert influence(p, 2) == pytest.approx(4.0)
        total = sum(influence(p, i) for i in range(3))
        lw = expand(p).level_weights()
        assert total == pytest.approx(6.0)
        assert total == pytest.approx(sum(k * w for k, w in lw.items()))

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            influence(x(0, 2), 2)

    @pytest.mark.parametrize("seed", range(5))
    def test_two_formulas_agree(self, seed):
        p = random_poly(6, 3, np.random.default_rng(seed), "multilinear")
        for i in range(6):
            assert influence(p, i) == pytest.approx(influence_by_restriction(p, i), rel=1e-9, abs=1e-12)
            assert influence(p.to_poly(), i) == pytest.approx(influence(p, i), rel=1e-9)

    def test_influence_is_derivative_norm(self, rng):
        p = random_poly(4, 4, rng)
        for i in range(4):
            assert influence(p, i) == pytest.approx(gaussian_l2(p.derivative(i)) ** 2, rel=1e-9)


class TestRegularity:
    def test_examples(self):
        avg = MultilinearPoly.from_sets(8, [((i,), 1 / math.sqrt(8)) for i in range(8)])
        assert is_tau_regular(avg, 1 / 8) == (True, None)
        assert is_tau_regular(MultilinearPoly(1, {1: 1.0}), 0.5) == (False, 0)
        assert is_tau_regular(MultilinearPoly(2, {3: 1.0}), 1.0) == (True, None)

    def test_tie_goes_to_lowest_index(self):
        p = MultilinearPoly.from_sets(3, [((1,), 1.0), ((2,), 1.0)])
        assert is_tau_regular(p, 0.1) == (False, 1)

    def test_zero_variance_rejected(self):
        with pytest.raises(ValueError):
            is_tau_regular(MultilinearPoly(3, {0: 2.0}), 0.5)


class TestRestrict:
    def test_examples(self):
        p = MultilinearPoly.from_sets(2, [((0, 1), 1.0)])
        r, free = restrict(p, {0: 1})
        assert r == MultilinearPoly(1, {1: 1.0}) and free == [1]
        q = MultilinearPoly.from_sets(2, [((0, 1), 1.0), ((0,), 1.0)])
        r, _ = restrict(q, {0: -1})
        assert r == MultilinearPoly(1, {1: -1.0, 0: -1.0})

    def test_bad_value(self):
        with pytest.raises(ValueError):
            restrict(MultilinearPoly(2, {1: 1.0}), {0: 0})

    def test_martingale_mean(self, rng):
        p = random_poly(4, 3, rng, "multilinear")
        norms = [restrict(p, {0: a, 2: b})[0].l2_squared for a in (1, -1) for b in (1, -1)]
        assert np.mean(norms) == pytest.approx(p.l2_squared, rel=1e-12)

    def test_agrees_with_evaluation(self, rng):
        p = random_poly(5, 3, rng, "multilinear")
        r, free = restrict(p, {1: -1, 3: 1})
        for v in all_vertices(3):
            full = np.empty(5)
            full[1], full[3] = -1, 1
            full[free] = v
            assert evaluate(r, v) == pytest.approx(evaluate(p, full), abs=1e-12)


class TestSerialisation:
    def test_json_round_trip(self, rng):
        for fam in ("dense", "multilinear", "homogeneous"):
            p = random_poly(4, 3, rng, fam)
            assert from_json(to_json(p)) == p

    def test_json_layout(self):
        p = MultilinearPoly.from_sets(2, [((0, 1), 2.0)])
        assert p.to_json() == {"n": 2, "terms": [{"mask": 3, "coef": 2.0}]}
        q = Poly(2, {(0, 0): 1.5})
        assert q.to_json() == {"n": 2, "terms": [{"vars": [0, 0], "coef": 1.5}]}


def test_compose():
    h = Poly(2, {(0, 1): 1.0})
    q = [x(0, 2), x(0, 2) + x(1, 2)]
    assert compose(h, q) == x(0, 2) ** 2 + x(0, 2) * x(1, 2)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 15), st.floats(-10, 10, allow_nan=False)), max_size=12))
def test_multilinear_truth_table_matches_evaluate(terms):
    p = MultilinearPoly(4, terms)
    tt = p.truth_table()
    for v, row in enumerate(all_vertices(4)):
        assert tt[v] == pytest.approx(evaluate(p, row), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_arithmetic_is_pointwise(seed):
    rng = np.random.default_rng(seed)
    p, q = random_poly(3, 2, rng), random_poly(3, 2, rng)
    X = rng.standard_normal((5, 3))
    np.testing.assert_allclose((p * q).eval_batch(X), p.eval_batch(X) * q.eval_batch(X), rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose((p - q).eval_batch(X), p.eval_batch(X) - q.eval_batch(X), rtol=1e-9, atol=1e-9)
