import math

import numpy as np
import pytest

from ptflab.analysis.regularity import (
    IRREGULAR,
    LOW_VARIANCE,
    REGULAR,
    leaf_restriction_error,
    regularity_tree,
    restriction_norm_tail,
)
from ptflab.poly import MultilinearPoly, influence, is_tau_regular, random_poly, restrict

from conftest import all_vertices


def linear(n, coef):
    return MultilinearPoly.from_sets(n, [((i,), coef) for i in range(n)])


class TestRegularityTree:
    def test_already_regular(self):
        t = regularity_tree(linear(8, 1 / math.sqrt(8)), 1 / 8)
        assert len(t.leaves) == 1 and t.leaves[0].classification == REGULAR and t.depth == 0

    def test_branches_on_dominant_variable(self):
        # x0 * (x1 + ... + x8) / sqrt(8)
        p = MultilinearPoly.from_sets(9, [((0, i), 1 / math.sqrt(8)) for i in range(1, 9)])
        t = regularity_tree(p, 1 / 8)
        assert t.root.var == 0
        assert len(t.leaves) == 2
        for leaf in t.leaves:
            assert leaf.classification == REGULAR
            sgn = leaf.path[0]
            expected = MultilinearPoly.from_sets(8, [((i,), sgn / math.sqrt(8)) for i in range(8)])
            assert leaf.poly.allclose(expected, 1e-12)

    def test_full_restriction_of_monomial(self):
        p = MultilinearPoly(3, {7: 1.0})
        t = regularity_tree(p, 0.1, depth_cap=3)
        assert len(t.leaves) == 8
        assert all(l.classification == LOW_VARIANCE and l.depth == 3 for l in t.leaves)

    def test_depth_cap_leaves_irregular_mass(self):
        p = MultilinearPoly(3, {7: 1.0})
        t = regularity_tree(p, 0.1, depth_cap=1)
        assert t.irregular_mass == pytest.approx(1.0)
        assert all(l.classification == IRREGULAR for l in t.leaves)

    @pytest.mark.parametrize("seed", range(3))
    def test_partition_and_restrictions(self, seed):
        p = random_poly(9, 3, np.random.default_rng(seed), "multilinear")
        t = regularity_tree(p, 0.2, M=2)
        assert sum(l.mass for l in t.leaves) == pytest.approx(1.0, abs=1e-12)
        assert t.good_mass + t.irregular_mass == pytest.approx(1.0)
        for leaf in t.leaves:
            assert len(set(leaf.path)) == leaf.depth
            assert leaf_restriction_error(p, leaf) <= 1e-12
            if leaf.classification == REGULAR:
                assert is_tau_regular(leaf.poly, 0.2)[0]
        # every vertex lands in exactly one leaf consistent with its path
        V = all_vertices(9).astype(int)
        for v in V[:: 37]:
            leaf = t.leaf_for(v)
            assert all(v[i] == s for i, s in leaf.path.items())

    def test_branches_on_highest_influence(self):
        p = MultilinearPoly.from_sets(4, [((2,), 3.0), ((0, 1), 1.0), ((3,), 0.5)])
        t = regularity_tree(p, 0.1)
        infl = [influence(p, i) for i in range(4)]
        assert t.root.var == int(np.argmax(infl)) == 2

    def test_validation(self):
        with pytest.raises(ValueError):
            regularity_tree(MultilinearPoly(25, {1: 1.0}), 0.1)
        with pytest.raises(ValueError):
            regularity_tree(MultilinearPoly(2, {1: 1.0}), 0.0)


class TestRestrictionNormTail:
    def test_empty_set(self):
        r = restriction_norm_tail(random_poly(4, 2, np.random.default_rng(0), "multilinear"), [])
        np.testing.assert_allclose(r["ratios"], [1.0])

    def test_monomial(self):
        r = restriction_norm_tail(MultilinearPoly(2, {3: 1.0}), [0])
        np.testing.assert_allclose(r["ratios"], [1.0, 1.0])
        assert r["large"] == 1.0

    def test_sum_of_two(self):
        r = restriction_norm_tail(MultilinearPoly.from_sets(2, [((0,), 1.0), ((1,), 1.0)]), [0])
        np.testing.assert_allclose(r["ratios"], [1.0, 1.0])
        assert r["tail"][1.0] == 1.0 and r["tail"][2.0] == 0.0

    def test_against_restrict(self, rng):
        p = random_poly(6, 3, rng, "multilinear")
        S = [1, 4, 5]
        r = restriction_norm_tail(p, S)
        norm = math.sqrt(p.l2_squared)
        for v in range(8):
            assignment = {S[t]: (-1 if v >> t & 1 else 1) for t in range(3)}
            q, _ = restrict(p, assignment)
            assert r["ratios"][v] == pytest.approx(math.sqrt(q.l2_squared) / norm, rel=1e-12)
        # martingale: mean of squared ratios is 1
        assert np.mean(r["ratios"] ** 2) == pytest.approx(1.0)

    def test_errors(self):
        with pytest.raises(IndexError):
            restriction_norm_tail(MultilinearPoly(2, {1: 1.0}), [3])
        with pytest.raises(ValueError):
            restriction_norm_tail(MultilinearPoly(2), [0])
