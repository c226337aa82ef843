import itertools
import math

import numpy as np
import pytest

from ptflab.kwise import KWiseFamily, Seed
from ptflab.poly import Poly, random_poly
from ptflab.prg import (
    BernoulliPrgSpec,
    GaussianPrgSpec,
    TrueGaussianFamily,
    bernoulli_prg_batch,
    bernoulli_prg_moments,
    bernoulli_prg_moments_bruteforce,
    bernoulli_prg_sample,
    fooling_gap,
    fooling_gaps,
    gaussian_prg_batch,
    gaussian_prg_moments,
    gaussian_prg_sample,
    independent_marginal_moments,
    max_monomial_deviation,
    suggest_parameters,
)
from ptflab.walsh import popcounts


class TestGaussianPrg:
    def test_true_gaussian_double_with_one_block(self):
        spec = GaussianPrgSpec(4, 2, 1, 2, family=TrueGaussianFamily(4))
        s = Seed(5, 1)
        np.testing.assert_array_equal(gaussian_prg_sample(spec, s), s.child(0).generator().standard_normal(4))

    def test_mc_moments(self):
        spec = GaussianPrgSpec(3, 2, 4, 4)
        X = gaussian_prg_batch(spec, np.random.default_rng(3), 1_000_000)
        n = X.shape[0]
        for j in range(3):
            assert abs(X[:, j].mean()) < 4 * X[:, j].std() / math.sqrt(n)
            sq = X[:, j] ** 2
            assert abs(sq.mean() - 1) < 4 * sq.std() / math.sqrt(n)
        prod = X[:, 0] * X[:, 2]
        assert abs(prod.mean()) < 4 * prod.std() / math.sqrt(n)

    def test_sample_is_deterministic(self):
        spec = GaussianPrgSpec(5, 2, 3, 4)
        np.testing.assert_array_equal(gaussian_prg_sample(spec, Seed(1, 2)), gaussian_prg_sample(spec, Seed(1, 2)))

    def test_seed_bits(self):
        spec = GaussianPrgSpec(5, 2, 7, 4)
        assert spec.seed_bits == 7 * spec.family.seed_bits

    def test_validation(self):
        with pytest.raises(ValueError):
            GaussianPrgSpec(3, 2, 0, 4)
        with pytest.raises(ValueError):
            GaussianPrgSpec(3, 2, 2, 1)

    def test_low_degree_moments_match_independent_copies(self):
        # any monomial touching at most k coordinates sees k-wise independence exactly
        fam = KWiseFamily(3, 2, "gaussian", prime=5, refine_bits=0)
        spec = GaussianPrgSpec(3, 2, 2, 2, family=fam)
        exps = [e for e in itertools.product(range(5), repeat=3) if 0 < sum(e) and sum(1 for v in e if v) <= 2]
        got = gaussian_prg_moments(spec, exps)
        ref = independent_marginal_moments(spec, exps)
        np.testing.assert_allclose(got, ref, atol=1e-12)


class TestBernoulliPrg:
    def test_uniform_when_single_bucket_and_full_independence(self):
        # k_inner = n gives a fully independent inner family
        spec = BernoulliPrgSpec(4, 1, 1, 4)
        moments = bernoulli_prg_moments(spec)
        assert moments[0] == pytest.approx(1.0)
        assert max_monomial_deviation(moments, 4) <= 1e-12

    def test_low_degree_monomials_vanish(self):
        spec = BernoulliPrgSpec(8, 1, 2, 4, inner=KWiseFamily(8, 4, "sign", field_bits=4))
        assert spec.inner.field_size == 16
        assert max_monomial_deviation(bernoulli_prg_moments(spec), 4) <= 1e-12

    def test_factorised_moments_match_bruteforce(self):
        # k_inner = 1 makes each bucket constant, so many moments are nonzero
        for inner_k, bits in [(1, 2), (2, 2)]:
            spec = BernoulliPrgSpec(3, 0, 2, inner_k, hash=KWiseFamily(3, 2, "uniform01", prime=3),
                                    inner=KWiseFamily(3, inner_k, "sign", field_bits=bits))
            fast = bernoulli_prg_moments(spec)
            slow = bernoulli_prg_moments_bruteforce(spec)
            np.testing.assert_allclose(fast, slow, atol=1e-12)
            if inner_k == 1:
                assert np.max(np.abs(fast[popcounts(3) > 0])) > 0.1

    def test_marginal_unbiased(self):
        spec = BernoulliPrgSpec(6, 1, 3, 4)
        m = bernoulli_prg_moments(spec)
        assert all(abs(m[1 << i]) <= 1e-12 for i in range(6))

    def test_sampler_outputs(self):
        spec = BernoulliPrgSpec(10, 1, 3, 4)
        x = bernoulli_prg_sample(spec, Seed(9))
        assert set(np.unique(x)) <= {-1.0, 1.0} and x.shape == (10,)
        X = bernoulli_prg_batch(spec, np.random.default_rng(0), 200_000)
        assert np.all(np.abs(X.mean(axis=0)) < 4 / math.sqrt(X.shape[0]))

    def test_validation(self):
        with pytest.raises(ValueError):
            BernoulliPrgSpec(8, 2, 2, 4)
        with pytest.raises(ValueError):
            BernoulliPrgSpec(8, 1, 0, 4)
        with pytest.raises(ValueError):
            BernoulliPrgSpec(8, 1, 2, 4, hash=KWiseFamily(8, 3, "uniform01"))

    def test_seed_accounting(self):
        spec = BernoulliPrgSpec(8, 1, 2, 4)
        assert spec.seed_bits == spec.hash.seed_bits + 2 * spec.inner.seed_bits
        assert spec.seed_count == spec.hash.seed_count * spec.inner.seed_count ** 2


class TestFooling:
    def test_constant_polynomial(self):
        spec = BernoulliPrgSpec(6, 1, 2, 4)
        assert fooling_gap(spec, Poly.const(1.0, 6), mode="enumerate").gap == 0.0
        g = GaussianPrgSpec(4, 2, 3, 4)
        res = fooling_gap(g, Poly.const(2.0, 4), samples=1000)
        assert res.gap == 0.0 and res.stderr == 0.0

    def test_dictator_exact(self):
        spec = BernoulliPrgSpec(6, 1, 2, 4)
        res = fooling_gap(spec, Poly.var(0, 6), mode="enumerate")
        assert res.gap == pytest.approx(0.0, abs=1e-12)

    def test_enumerated_gap_for_low_degree_ptf(self, rng):
        # a degree-1 PTF on few variables is a function of <= 4 coordinates' characters
        spec = BernoulliPrgSpec(4, 1, 2, 4)
        p = random_poly(4, 1, rng, "multilinear")
        assert fooling_gap(spec, p, mode="enumerate").gap <= 1e-12

    def test_monte_carlo_gap_consistent(self, rng):
        spec = BernoulliPrgSpec(8, 1, 2, 4)
        polys = [random_poly(8, 2, rng, "multilinear") for _ in range(3)]
        exact = fooling_gaps(spec, polys, mode="enumerate")
        mc = fooling_gaps(spec, polys, samples=100_000, seed=Seed(3, 0))
        for e, m in zip(exact, mc):
            assert abs(e.prg_mean - m.prg_mean) < 5 * m.stderr + 1e-12
            assert m.reference_mean == e.reference_mean

    def test_gaussian_gap_small_for_many_blocks(self, rng):
        spec = GaussianPrgSpec(6, 2, 16, 4)
        p = random_poly(6, 2, rng)
        res = fooling_gap(spec, p, samples=100_000, seed=Seed(11, 0))
        assert res.gap < 5 * res.stderr + 0.02

    def test_bernoulli_mean_gap_does_not_grow_with_a_and_k(self):
        polys = [random_poly(12, 2, np.random.default_rng(100 + i)) for i in range(50)]
        small = fooling_gaps(BernoulliPrgSpec(12, 2, 2, 8), polys, samples=200_000, seed=Seed(21, 0))
        large = fooling_gaps(BernoulliPrgSpec(12, 2, 4, 16), polys, samples=200_000, seed=Seed(21, 0))
        # both gaps sit at the MC noise floor; |N(0, s)| has sd s*sqrt(1 - 2/pi)
        se = np.mean([r.stderr for r in small + large])
        resolution = 3 * math.sqrt(2) * math.sqrt(1 - 2 / math.pi) * se / math.sqrt(len(polys))
        assert np.mean([r.gap for r in large]) <= np.mean([r.gap for r in small]) + resolution

    def test_thread_count_invariance(self, rng):
        spec = GaussianPrgSpec(4, 2, 8, 4)
        p = random_poly(4, 2, rng)
        a = fooling_gap(spec, p, samples=20_000, seed=Seed(1, 0), threads=1)
        b = fooling_gap(spec, p, samples=20_000, seed=Seed(1, 0), threads=4)
        assert a == b

    def test_errors(self):
        spec = GaussianPrgSpec(3, 2, 2, 4)
        with pytest.raises(ValueError):
            fooling_gap(spec, Poly.var(5, 6))
        with pytest.raises(ValueError):
            fooling_gap(spec, Poly.var(0, 3), mode="bogus")
        with pytest.raises(ValueError):
            fooling_gap(spec, Poly.var(0, 3), mode="enumerate")


def test_parameter_suggestions():
    s = suggest_parameters(0.5, 2, c=0.5)
    assert s["gaussian"] == {"N": math.ceil(0.5 ** -2.5), "k": 4}
    assert s["bernoulli"]["k_inner"] == math.ceil(0.5 ** -5) + 8
    with pytest.raises(ValueError):
        suggest_parameters(1.5, 2)
