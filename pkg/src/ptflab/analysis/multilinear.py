"""The multilinearization correction operator and composition identities.

``A(p_1, ..., p_k) = sum_{S subset [k]} (-1)**|S| (prod_{i in S} p_i) L(prod_{i not in S} p_i)``
where ``L`` is multilinearization.  It measures how far ``L`` is from being
multiplicative on a product.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Sequence

from ..poly import AnyPoly, Poly, as_poly, compose, multilinearize

MAX_ARGS = 4


def _L(p: Poly) -> Poly:
    return multilinearize(p).to_poly()


def _prod(ps: Sequence[Poly], n: int) -> Poly:
    out = Poly.const(1.0, n)
    for p in ps:
        out = out * p
    return out


def _align(ps: Sequence[AnyPoly]) -> tuple[list[Poly], int]:
    ps = [as_poly(p) for p in ps]
    n = max((p.n for p in ps), default=0)
    return [p.with_n(n) for p in ps], n


def a_operator(ps: Sequence[AnyPoly], n: int | None = None) -> Poly:
    """``A(p_1, ..., p_k)`` for ``k <= 4``; ``A()`` is the constant 1."""
    if len(ps) > MAX_ARGS:
        raise ValueError(f"A supports at most {MAX_ARGS} arguments, got {len(ps)}")
    ps, m = _align(ps)
    n = m if n is None else max(n, m)
    ps = [p.with_n(n) for p in ps]
    k = len(ps)
    out = Poly(n)
    for r in range(k + 1):
        for S in itertools.combinations(range(k), r):
            inside = [ps[i] for i in S]
            outside = [ps[i] for i in range(k) if i not in S]
            term = _prod(inside, n) * _L(_prod(outside, n))
            out = out + term if r % 2 == 0 else out - term
    return out


def composition_subset_expansion(h: AnyPoly, qs: Sequence[AnyPoly]) -> Poly:
    """``L(h(q))`` rebuilt monomial by monomial as a sum over position subsets.

    A monomial ``c * q_{i_1} ... q_{i_d}`` contributes
    ``c * sum_T (prod_{j not in T} q_{i_j}) A(q_{i_t} : t in T)``.  The identity
    holds for any ``q``; it is most useful when the ``q_i`` are multilinear,
    since then every ``|T| = 1`` term vanishes.
    """
    h = as_poly(h)
    qs, n = _align(qs)
    if h.n != len(qs):
        raise ValueError(f"h has {h.n} variables but {len(qs)} inner polynomials were given")
    cache: dict[tuple, Poly] = {}

    def A(idx: tuple) -> Poly:
        key = tuple(sorted(idx))
        if key not in cache:
            cache[key] = a_operator([qs[i] for i in key], n)
        return cache[key]

    out = Poly(n)
    for key, c in h.terms.items():
        d = len(key)
        for r in range(d + 1):
            for T in itertools.combinations(range(d), r):
                rest = _prod([qs[key[j]] for j in range(d) if j not in T], n)
                out = out + c * rest * A(tuple(key[t] for t in T))
    return out


def composition_derivative_expansion(h: AnyPoly, qs: Sequence[AnyPoly], normalization: str = "factorial") -> Poly:
    """``sum_k w_k sum_{i_1..i_k} (d^k h / dq_{i_1}..dq_{i_k})(q) A(q_{i_1}, ..., q_{i_k})``.

    The inner sum runs over ordered index tuples.  ``normalization="factorial"``
    uses ``w_k = 1/k!`` and reproduces :func:`composition_subset_expansion` exactly;
    ``"none"`` uses ``w_k = 1`` and overcounts repeated orderings.
    """
    if normalization not in ("factorial", "none"):
        raise ValueError(f"unknown normalization {normalization!r}")
    h = as_poly(h)
    qs, n = _align(qs)
    m = h.n
    if m != len(qs):
        raise ValueError(f"h has {h.n} variables but {len(qs)} inner polynomials were given")

    @lru_cache(maxsize=None)
    def deriv(idx: tuple) -> Poly:
        if not idx:
            return h
        return deriv(idx[:-1]).derivative(idx[-1])

    if h.degree > MAX_ARGS:
        raise ValueError(f"h must have degree <= {MAX_ARGS}")
    out = Poly(n)
    for k in range(h.degree + 1):
        w = 1.0 / math.factorial(k) if normalization == "factorial" else 1.0
        for idx in itertools.product(range(m), repeat=k):
            dh = deriv(tuple(sorted(idx)))
            if dh.is_zero():
                continue
            out = out + w * compose(dh, qs).with_n(n) * a_operator([qs[i] for i in idx], n)
    return out


__all__ = ["a_operator", "composition_subset_expansion", "composition_derivative_expansion"]
