"""Orthonormal Hermite expansion under the standard Gaussian measure.

``H_k`` denotes the normalised Hermite polynomial, ``E[H_j(X) H_k(X)] = delta_jk``
and ``H_k' = sqrt(k) H_{k-1}``.  A multi-index ``a`` (tuple of non-negative ints,
trailing zeros trimmed) labels ``H_a(x) = prod_i H_{a_i}(x_i)``.

All Gaussian expectations here use the exact moment formula
``E[X**(2m)] = (2m-1)!!`` so results are deterministic.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .poly import AnyPoly, Poly, as_poly

MAX_HERMITE_DEGREE = 30


def _trim(a) -> tuple:
    a = list(a)
    while a and a[-1] == 0:
        a.pop()
    return tuple(int(v) for v in a)


@lru_cache(maxsize=None)
def _hermite_coeffs(k: int) -> tuple[float, ...]:
    """Power-basis coefficients of ``H_k`` (index = power)."""
    prev = np.zeros(k + 1)
    cur = np.zeros(k + 1)
    cur[0] = 1.0
    for j in range(k):
        # H_{j+1} = (x H_j - sqrt(j) H_{j-1}) / sqrt(j+1)
        nxt = np.zeros(k + 1)
        nxt[1:] = cur[:-1]
        nxt -= math.sqrt(j) * prev
        nxt /= math.sqrt(j + 1)
        prev, cur = cur, nxt
    return tuple(cur.tolist())


def hermite_1d(k: int) -> Poly:
    """Normalised Hermite polynomial ``H_k`` as a one-variable :class:`Poly`."""
    if not 0 <= k <= MAX_HERMITE_DEGREE:
        raise ValueError(f"Hermite degree must be in [0, {MAX_HERMITE_DEGREE}], got {k}")
    coeffs = _hermite_coeffs(k)
    return Poly(1, {(0,) * e: c for e, c in enumerate(coeffs) if c != 0.0})


@lru_cache(maxsize=None)
def _power_in_hermite(e: int) -> tuple[tuple[int, float], ...]:
    """``x**e = sum_j e!/(j! 2**j (e-2j)!) * sqrt((e-2j)!) * H_{e-2j}``."""
    out = []
    for j in range(e // 2 + 1):
        m = e - 2 * j
        c = math.factorial(e) / (math.factorial(j) * 2 ** j * math.factorial(m))
        out.append((m, c * math.sqrt(math.factorial(m))))
    return tuple(out)


def gaussian_moment(e: int) -> float:
    """``E[X**e]`` for standard Gaussian ``X``."""
    if e % 2:
        return 0.0
    return float(math.prod(range(e - 1, 0, -2)))


def gaussian_expectation(p: AnyPoly) -> float:
    """Exact ``E[p(X)]`` for ``X ~ N(0, I_n)``."""
    total = 0.0
    for key, c in as_poly(p).terms.items():
        term = c
        for e in Counter(key).values():
            term *= gaussian_moment(e)
            if term == 0.0:
                break
        total += term
    return total


def gaussian_norm(p: AnyPoly, t: int) -> float:
    """``|p|_t`` for even ``t`` via exact expansion of ``p**t``."""
    if t < 2 or t % 2:
        raise ValueError("t must be a positive even integer")
    return gaussian_expectation(as_poly(p) ** t) ** (1.0 / t)


@dataclass(frozen=True)
class HermiteExpansion:
    """Coefficients ``c_a(p)`` of ``p = sum_a c_a H_a``."""

    n: int
    coeffs: Mapping[tuple, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for a, c in self.coeffs.items():
            a = _trim(a)
            if len(a) > self.n:
                raise ValueError(f"multi-index {a} longer than n={self.n}")
            if c != 0.0:
                clean[a] = clean.get(a, 0.0) + float(c)
        object.__setattr__(self, "coeffs", {a: clean[a] for a in sorted(clean) if clean[a] != 0.0})

    def coefficient(self, a) -> float:
        return self.coeffs.get(_trim(a), 0.0)

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.coeffs), default=0)

    def l2_squared(self) -> float:
        return float(sum(c * c for c in self.coeffs.values()))

    def level(self, k: int) -> "HermiteExpansion":
        return HermiteExpansion(self.n, {a: c for a, c in self.coeffs.items() if sum(a) == k})

    def level_weights(self) -> dict[int, float]:
        """``|p^[k]|_2**2`` for each level ``k`` present."""
        out: dict[int, float] = {}
        for a, c in self.coeffs.items():
            out[sum(a)] = out.get(sum(a), 0.0) + c * c
        return dict(sorted(out.items()))


def expand(p: AnyPoly) -> HermiteExpansion:
    """Exact change of basis from monomials to the tensor Hermite basis."""
    p = as_poly(p)
    if p.degree > MAX_HERMITE_DEGREE:
        raise ValueError(f"degree {p.degree} exceeds {MAX_HERMITE_DEGREE}")
    acc: dict[tuple, float] = {}
    for key, c in p.terms.items():
        exps = sorted(Counter(key).items())
        partial = {(): c}
        for var, e in exps:
            nxt = {}
            for idx, val in partial.items():
                for m, w in _power_in_hermite(e):
                    a = dict(idx)
                    if m:
                        a[var] = m
                    k = tuple(sorted(a.items()))
                    nxt[k] = nxt.get(k, 0.0) + val * w
            partial = nxt
        for idx, val in partial.items():
            a = [0] * p.n
            for var, m in idx:
                a[var] = m
            a = _trim(a)
            acc[a] = acc.get(a, 0.0) + val
    return HermiteExpansion(p.n, acc)


def reconstruct(h: HermiteExpansion) -> Poly:
    """Inverse of :func:`expand`."""
    acc: dict[tuple, float] = {}
    for a, c in h.coeffs.items():
        partial = {(): c}
        for var, m in enumerate(a):
            if not m:
                continue
            hc = _hermite_coeffs(m)
            nxt = {}
            for key, val in partial.items():
                for e, w in enumerate(hc):
                    if w == 0.0:
                        continue
                    k = key + (var,) * e
                    nxt[k] = nxt.get(k, 0.0) + val * w
            partial = nxt
        for key, val in partial.items():
            acc[key] = acc.get(key, 0.0) + val
    # drop float dust left by cancellation
    scale = max((abs(v) for v in acc.values()), default=0.0)
    return Poly(h.n, {k: v for k, v in acc.items() if abs(v) > 1e-15 * scale})


def harmonic_part(p: AnyPoly, k: int) -> Poly:
    """``p^[k]``, the projection of ``p`` onto Hermite level ``k``."""
    return reconstruct(expand(p).level(k))


def falling_factorial(x: int, k: int) -> int:
    return math.prod(range(x, x - k, -1))


def derivative_norm_check(p: AnyPoly, k: int) -> tuple[float, float]:
    """Both sides of ``sum |D_{i1}..D_{ik} p|_2^2 <= d(d-1)..(d-k+1) |p|_2^2``.

    The left side sums over all ordered ``k``-tuples of coordinates; in
    Hermite coordinates it equals ``sum_a c_a**2 * (|a|)_k``.
    """
    h = expand(p)
    d = h.degree
    if k > d:
        raise ValueError(f"k={k} exceeds deg(p)={d}")
    lhs = float(sum(c * c * falling_factorial(sum(a), k) for a, c in h.coeffs.items()))
    rhs = float(falling_factorial(d, k) * h.l2_squared())
    return lhs, rhs


def derivative_norm_direct(p: AnyPoly, k: int) -> float:
    """Left side of :func:`derivative_norm_check` by explicit differentiation."""
    p = as_poly(p)
    frontier = [p]
    for _ in range(k):
        frontier = [q.derivative(i) for q in frontier for i in range(p.n)]
    return float(sum(expand(q).l2_squared() for q in frontier if not q.is_zero()))


__all__ = [
    "HermiteExpansion", "hermite_1d", "expand", "reconstruct", "harmonic_part",
    "derivative_norm_check", "derivative_norm_direct", "gaussian_expectation",
    "gaussian_moment", "gaussian_norm", "falling_factorial",
]
