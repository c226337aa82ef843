"""Decision-tree regularity decomposition and restriction-norm statistics.

:func:`regularity_tree` restricts the highest-influence variable of every
leaf that is neither regular nor low-variance, until the depth cap.  Nodes at
one depth are processed together as rows of a dense coefficient matrix over
their free variables.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from ..poly import MAX_EXACT_VARS, MultilinearPoly, restrict
from ..walsh import fwht

REGULAR = "regular"
LOW_VARIANCE = "low_variance"
IRREGULAR = "irregular"
MAX_TREE_VARS = 24
MAX_TAIL_VARS = 20


@dataclass
class Leaf:
    path: dict  # original variable -> +-1
    coeffs: np.ndarray  # dense over ``free``
    free: tuple
    classification: str
    max_influence_ratio: float = 0.0

    @property
    def depth(self) -> int:
        return len(self.path)

    @property
    def mass(self) -> float:
        return 2.0 ** -self.depth

    @cached_property
    def poly(self) -> MultilinearPoly:
        """The restricted polynomial, variables renumbered in ``free`` order."""
        return MultilinearPoly.from_dense(self.coeffs)


@dataclass
class Node:
    var: int
    plus: "Node | Leaf"
    minus: "Node | Leaf"


@dataclass
class DecisionTree:
    root: "Node | Leaf"
    leaves: list = field(default_factory=list)
    n: int = 0
    tau: float = 0.0
    M: int = 0
    depth_cap: int = 0

    def mass(self, classification: str) -> float:
        return float(sum(l.mass for l in self.leaves if l.classification == classification))

    @property
    def irregular_mass(self) -> float:
        return self.mass(IRREGULAR)

    @property
    def good_mass(self) -> float:
        return self.mass(REGULAR) + self.mass(LOW_VARIANCE)

    @property
    def depth(self) -> int:
        return max((l.depth for l in self.leaves), default=0)

    def leaf_for(self, x: Sequence[int]) -> Leaf:
        node = self.root
        while isinstance(node, Node):
            node = node.plus if x[node.var] == 1 else node.minus
        return node


def _bit_matrix(k: int) -> np.ndarray:
    v = np.arange(1 << k)
    return ((v[:, None] >> np.arange(k)) & 1).astype(np.float64)


def _classify(C: np.ndarray, tau: float, M: int):
    """Per-row classification, influence argmax and max-influence/variance ratio."""
    C2 = C * C
    l2 = C2.sum(axis=1)
    var = l2 - C2[:, 0]
    k = C.shape[1].bit_length() - 1
    if k:
        inf = C2 @ _bit_matrix(k)
        arg = np.argmax(inf, axis=1)
        top = inf[np.arange(C.shape[0]), arg]
    else:
        arg = np.zeros(C.shape[0], dtype=np.int64)
        top = np.zeros(C.shape[0])
    low = (var <= 0.0) | (var < tau ** M * l2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(var > 0, top / np.where(var > 0, var, 1.0), 0.0)
    regular = ~low & (top <= tau * var)
    return low, regular, arg, ratio


def regularity_tree(p: MultilinearPoly, tau: float, M: int = 2, depth_cap: int | None = None) -> DecisionTree:
    """Branch on highest-influence variables until every leaf is regular or low-variance.

    A leaf with restriction ``p_rho`` is low-variance when
    ``var(p_rho) < tau**M * |p_rho|_2**2`` (or the variance is zero) and
    regular when every influence is at most ``tau * var(p_rho)``.  Leaves
    reaching ``depth_cap`` otherwise are ``irregular``.  Ties in influence go to
    the lowest variable index.
    """
    n = p.n
    if n > min(MAX_TREE_VARS, MAX_EXACT_VARS):
        raise ValueError(f"regularity trees need n <= {MAX_TREE_VARS}, got {n}")
    if not tau > 0:
        raise ValueError("tau must be positive")
    depth_cap = n if depth_cap is None else min(int(depth_cap), n)
    if depth_cap < 0:
        raise ValueError("depth_cap must be nonnegative")

    leaves: list[Leaf] = []
    # every pending node: (slot setter, path, free)
    C = p.dense()[None, :]
    paths = [dict()]
    frees = [tuple(range(n))]
    setters = [None]
    holder: dict = {}

    def put(setter, obj):
        if setter is None:
            holder["root"] = obj
        else:
            setter(obj)

    depth = 0
    while C.shape[0]:
        low, regular, arg, ratio = _classify(C, tau, M)
        k = C.shape[1].bit_length() - 1
        expand = ~low & ~regular & (depth < depth_cap) & (k > 0)
        for r in np.flatnonzero(~expand):
            cls = LOW_VARIANCE if low[r] else REGULAR if regular[r] else IRREGULAR
            leaf = Leaf(paths[r], C[r].copy(), frees[r], cls, float(ratio[r]))
            leaves.append(leaf)
            put(setters[r], leaf)
        rows = np.flatnonzero(expand)
        if rows.size == 0:
            break
        half = 1 << (k - 1)
        u = np.arange(half)
        js = arg[rows]
        lo = u[None, :] & ((1 << js[:, None]) - 1)
        hi = u[None, :] >> js[:, None]
        orig0 = lo | (hi << (js[:, None] + 1))
        orig1 = orig0 | (1 << js[:, None])
        sub = C[rows]
        a = np.take_along_axis(sub, orig0, axis=1)
        b = np.take_along_axis(sub, orig1, axis=1)
        newC = np.empty((2 * rows.size, half))
        newC[0::2] = a + b
        newC[1::2] = a - b
        new_paths, new_frees, new_setters = [], [], []
        for t, r in enumerate(rows):
            j = int(js[t])
            var = frees[r][j]
            node = Node(var, None, None)
            put(setters[r], node)
            child_free = frees[r][:j] + frees[r][j + 1:]
            for sgn in (1, -1):
                path = dict(paths[r])
                path[var] = sgn
                new_paths.append(path)
                new_frees.append(child_free)
                attr = "plus" if sgn == 1 else "minus"
                new_setters.append(lambda obj, node=node, attr=attr: setattr(node, attr, obj))
        C, paths, frees, setters = newC, new_paths, new_frees, new_setters
        depth += 1
    return DecisionTree(holder["root"], leaves, n, float(tau), int(M), depth_cap)


def leaf_restriction_error(p: MultilinearPoly, leaf: Leaf) -> float:
    """Max coefficient difference between ``leaf.poly`` and ``restrict(p, leaf.path)``."""
    ref, free = restrict(p, leaf.path)
    if tuple(free) != tuple(leaf.free):
        return float("inf")
    d = ref.dense() if ref.n else np.array([ref.mean])
    return float(np.max(np.abs(d - leaf.coeffs)))


def restriction_norm_tail(p: MultilinearPoly, S: Sequence[int], thresholds: Sequence[float] = (1, 2, 4, 8)
                          ) -> dict:
    """Exact distribution of ``|p_A|_2 / |p|_2`` over all assignments ``A`` to ``S``.

    Returns the ratios (vertex encoding over ``S``), ``Pr(ratio >= N)`` for
    each threshold and ``Pr(ratio >= 1/2)``.
    """
    S = list(dict.fromkeys(int(i) for i in S))
    s = len(S)
    if s > MAX_TAIL_VARS:
        raise ValueError(f"|S| must be <= {MAX_TAIL_VARS}, got {s}")
    for i in S:
        if not 0 <= i < p.n:
            raise IndexError(f"variable {i} out of range for n={p.n}")
    norm2 = p.l2_squared
    if norm2 == 0:
        raise ValueError("zero polynomial")
    s_mask = sum(1 << i for i in S)
    groups: dict[int, np.ndarray] = {}
    for mask, c in p.terms.items():
        U = mask & ~s_mask
        local = 0
        for t, i in enumerate(S):
            if mask >> i & 1:
                local |= 1 << t
        g = groups.get(U)
        if g is None:
            g = groups[U] = np.zeros(1 << s)
        g[local] += c
    G = np.stack(list(groups.values()))
    vals = fwht(G)
    ratio = np.sqrt(np.sum(vals * vals, axis=0) / norm2)
    tail = {float(N): float(np.mean(ratio >= N * (1 - 1e-12))) for N in thresholds}
    return {"ratios": ratio, "tail": tail, "large": float(np.mean(ratio >= 0.5 * (1 - 1e-12)))}


__all__ = [
    "REGULAR", "LOW_VARIANCE", "IRREGULAR", "Leaf", "Node", "DecisionTree", "regularity_tree",
    "leaf_restriction_error", "restriction_norm_tail",
]
