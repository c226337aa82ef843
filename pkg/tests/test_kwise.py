import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from ptflab.kwise import (
    GF2m,
    KWiseFamily,
    Seed,
    bucket_hash,
    bucket_marginal,
    collision_bound,
    collision_probability,
    hash_family,
    is_prime,
    next_prime,
    parse_seed,
    sample,
    verify_field_uniformity,
    verify_kwise,
)


class TestSeeds:
    def test_parse(self):
        assert parse_seed("42") == 42
        assert parse_seed("0xff") == 255
        assert parse_seed(7) == 7
        for bad in ("-1", "1.5", "abc", str(1 << 64)):
            with pytest.raises(ValueError):
                parse_seed(bad)

    def test_determinism(self):
        f = KWiseFamily(10, 4, "gaussian")
        s = Seed(123, 9)
        assert [sample(f, s, i) for i in range(10)] == [sample(f, Seed(123, 9), i) for i in range(10)]
        assert s.child(3) == Seed(123, 9).child(3) != s.child(4)


class TestFields:
    def test_primes(self):
        assert [p for p in range(30) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
        assert next_prime(90) == 97 and next_prime(0) == 2

    @pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
    def test_gf2m_is_a_field(self, m):
        F = GF2m(m)
        q = 1 << m
        a = np.arange(q)
        table = F.mul(a[:, None], a[None, :])
        for x in range(1, q):
            row = sorted(table[x].tolist())
            assert row == list(range(q))  # every nonzero element is invertible
        # associativity and distributivity on all triples
        for x, y, z in itertools.product(range(q), repeat=3):
            assert F.mul(F.mul(x, y), z) == F.mul(x, F.mul(y, z))
            assert F.mul(x, y ^ z) == F.mul(x, y) ^ F.mul(x, z)


class TestSignFamily:
    def test_constant_for_k1(self):
        f = KWiseFamily(6, 1, "sign")
        for s in range(5):
            vals = [sample(f, Seed(s, 0), i) for i in range(6)]
            assert len(set(vals)) == 1

    def test_pairwise_small_family(self):
        f = KWiseFamily(3, 2, "sign")
        C = f.enumerate_coefficients()
        V = f.values(C)
        assert V.shape == (f.seed_count, 3)
        assert np.all(V.mean(axis=0) == 0)
        for i, j in itertools.combinations(range(3), 2):
            assert np.mean(V[:, i] * V[:, j]) == 0

    @pytest.mark.parametrize("n,k", [(8, 2), (8, 4), (16, 3), (10, 4)])
    def test_exact_kwise(self, n, k):
        f = KWiseFamily(n, k, "sign")
        for pts in itertools.islice(itertools.combinations(range(n), k), 4):
            assert verify_kwise(f, pts, degree_cap=2 * k) <= 1e-12

    def test_field_values_uniform(self):
        f = KWiseFamily(8, 3, "sign")
        assert verify_field_uniformity(f, [0, 3, 7])

    def test_index_bounds(self):
        f = KWiseFamily(4, 2, "sign")
        with pytest.raises(IndexError):
            sample(f, Seed(0), 4)


class TestPrimeFamilies:
    def test_field_uniformity(self):
        f = KWiseFamily(7, 3, "uniform01", prime=7)
        assert verify_field_uniformity(f, [0, 2, 5])
        assert verify_field_uniformity(f, [1, 6])

    def test_uniform_moments_within_grid(self):
        p = 101
        f = KWiseFamily(20, 2, "uniform01", prime=p)
        assert verify_kwise(f, [3, 11], degree_cap=2) <= 1 / p

    def test_gaussian_mc_mean(self):
        f = KWiseFamily(5, 4, "gaussian")
        C = f.random_coefficients(np.random.default_rng(0), 1_000_000)
        v = f.values(C, [2])[:, 0]
        se = v.std() / math.sqrt(v.size)
        assert abs(v.mean()) < 4 * se
        assert abs(np.mean(v * v) - 1) < 4 * np.std(v * v) / math.sqrt(v.size)

    def test_gaussian_marginal_matches_quantiles(self):
        f = KWiseFamily(3, 2, "gaussian", prime=11, refine_bits=0)
        np.testing.assert_allclose(f.marginal_support(), norm.ppf((np.arange(11) + 0.5) / 11), atol=1e-12)

    def test_refinement_layers(self):
        f = KWiseFamily(3, 2, "gaussian")
        assert f.layers > 1
        assert f.seed_bits == f.k * f.layers * 31

    def test_prime_validation(self):
        with pytest.raises(ValueError):
            KWiseFamily(5, 2, "uniform01", prime=4)
        with pytest.raises(ValueError):
            KWiseFamily(10, 2, "uniform01", prime=7)
        with pytest.raises(ValueError):
            KWiseFamily(3, 2, "bogus")

    def test_enumeration_cap(self):
        with pytest.raises(ValueError):
            verify_kwise(KWiseFamily(5, 3, "uniform01", prime=257), [0, 1], 2)


class TestBuckets:
    def test_single_bucket(self):
        h = hash_family(10)
        assert all(bucket_hash(h, Seed(s), i, 1) == 0 for s in range(4) for i in range(10))

    def test_collision_probability(self):
        h = hash_family(101, prime=101)
        for i, j in [(0, 1), (5, 77), (99, 100)]:
            pr = collision_probability(h, i, j, 10)
            assert 1 / 10 - 1 / 101 <= pr <= 1 / 10 + 1 / 101
            assert pr <= collision_bound(h, 10)

    def test_marginal_uniform(self):
        h = hash_family(101, prime=101)
        assert np.max(np.abs(bucket_marginal(h, 17, 10) - 0.1)) <= 1 / 101

    def test_needs_pairwise_family(self):
        with pytest.raises(ValueError):
            bucket_hash(KWiseFamily(5, 3, "uniform01"), Seed(0), 0, 2)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 40), st.integers(1, 5), st.integers(0, 2 ** 63 - 1))
def test_sign_outputs_are_signs(n, k, master):
    f = KWiseFamily(n, k, "sign")
    v = f.values(f.coefficients(Seed(master)))
    assert v.shape == (n,) and set(np.unique(v)) <= {-1.0, 1.0}
