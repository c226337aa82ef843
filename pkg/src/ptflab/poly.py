"""Exact polynomial representations over R^n.

Two representations are provided:

* :class:`Poly` -- general sparse polynomial.  A monomial is keyed by the sorted
  tuple of its variable indices *with repetition*, so ``x0**2 * x3`` has key
  ``(0, 0, 3)`` and the constant monomial has key ``()``.
* :class:`MultilinearPoly` -- multilinear polynomial keyed by subset bitmasks,
  the natural object for hypercube (Bernoulli) computations.

Both are immutable and keep no zero coefficients.  Iteration, evaluation and
serialisation always visit terms in ascending key order.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

import numpy as np

from .walsh import fwht, popcounts, vertex_matrix

MAX_MULTILINEAR_VARS = 63
MAX_EXACT_VARS = 24

Key = tuple


def _merge(a: Key, b: Key) -> Key:
    return tuple(sorted(a + b))


class Poly:
    """Sparse real polynomial in ``n`` variables."""

    def __init__(self, n: int, terms: Mapping[Key, float] | Iterable[tuple[Key, float]] = ()):
        if n < 0:
            raise ValueError("n must be non-negative")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Key, float] = {}
        for key, coef in items:
            key = tuple(sorted(int(v) for v in key))
            if key and (key[0] < 0 or key[-1] >= n):
                raise ValueError(f"monomial {key} uses a variable outside [0, {n})")
            acc[key] = acc.get(key, 0.0) + float(coef)
        self.n = n
        self._terms = {k: acc[k] for k in sorted(acc) if acc[k] != 0.0}

    # construction helpers -------------------------------------------------
    @classmethod
    def const(cls, c: float, n: int = 0) -> "Poly":
        return cls(n, {(): c})

    @classmethod
    def var(cls, i: int, n: int) -> "Poly":
        return cls(n, {(i,): 1.0})

    @classmethod
    def linear(cls, weights: Sequence[float], const: float = 0.0) -> "Poly":
        n = len(weights)
        terms = {(i,): w for i, w in enumerate(weights)}
        terms[()] = const
        return cls(n, terms)

    @classmethod
    def from_exponents(cls, n: int, terms: Iterable[tuple[Mapping[int, int], float]]) -> "Poly":
        """Build from ``({var: exponent}, coef)`` pairs."""
        out = []
        for exps, coef in terms:
            key = tuple(v for v, e in sorted(exps.items()) for _ in range(e))
            out.append((key, coef))
        return cls(n, out)

    # basic properties ----------------------------------------------------
    @property
    def terms(self) -> Mapping[Key, float]:
        return MappingProxyType(self._terms)

    @property
    def degree(self) -> int:
        return max((len(k) for k in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def is_homogeneous(self) -> bool:
        return len({len(k) for k in self._terms}) <= 1

    def is_multilinear(self) -> bool:
        return all(len(set(k)) == len(k) for k in self._terms)

    def coefficient(self, key: Key) -> float:
        return self._terms.get(tuple(sorted(key)), 0.0)

    def homogeneous_part(self, k: int) -> "Poly":
        return Poly(self.n, {m: c for m, c in self._terms.items() if len(m) == k})

    def variables(self) -> set[int]:
        return {v for k in self._terms for v in k}

    def with_n(self, n: int) -> "Poly":
        return Poly(n, self._terms)

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            return other
        if isinstance(other, MultilinearPoly):
            return other.to_poly()
        if isinstance(other, (int, float, np.integer, np.floating)):
            return Poly.const(float(other), self.n)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for k, c in other._terms.items():
            terms[k] = terms.get(k, 0.0) + c
        return Poly(max(self.n, other.n), terms)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.n, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.integer, np.floating)):
            return Poly(self.n, {k: c * float(other) for k, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict[Key, float] = {}
        for ka, ca in self._terms.items():
            for kb, cb in other._terms.items():
                k = _merge(ka, kb)
                terms[k] = terms.get(k, 0.0) + ca * cb
        return Poly(max(self.n, other.n), terms)

    __rmul__ = __mul__

    def __truediv__(self, other: float):
        return self * (1.0 / other)

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative powers are not polynomials")
        out = Poly.const(1.0, self.n)
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self._terms == other._terms
        return NotImplemented

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    def allclose(self, other: "Poly", tol: float = 1e-9) -> bool:
        """Coefficientwise comparison with absolute tolerance ``tol``."""
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coefficient(k) - other.coefficient(k)) <= tol for k in keys)

    def derivative(self, i: int) -> "Poly":
        terms = {}
        for k, c in self._terms.items():
            m = k.count(i)
            if m:
                j = k.index(i)
                terms[k[:j] + k[j + 1:]] = terms.get(k[:j] + k[j + 1:], 0.0) + c * m
        return Poly(self.n, terms)

    def gradient(self) -> list["Poly"]:
        return [self.derivative(i) for i in range(self.n)]

    # evaluation -------------------------------------------------------------
    def __call__(self, x) -> float:
        return evaluate(self, x)

    @cached_property
    def _compiled(self):
        if self.degree <= 2:
            c = self._terms.get((), 0.0)
            b = np.zeros(self.n)
            q = np.zeros((self.n, self.n))
            for k, coef in self._terms.items():
                if len(k) == 1:
                    b[k[0]] += coef
                elif len(k) == 2:
                    i, j = k
                    if i == j:
                        q[i, i] += coef
                    else:
                        q[i, j] += coef / 2
                        q[j, i] += coef / 2
            return ("quadratic", c, b, q)
        keys = list(self._terms)
        return ("general", [list(k) for k in keys], np.array([self._terms[k] for k in keys]))

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        """Evaluate at each row of ``X`` (shape ``(m, n)``)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise ValueError(f"expected shape (m, {self.n}), got {X.shape}")
        comp = self._compiled
        if comp[0] == "quadratic":
            _, c, b, q = comp
            return c + X @ b + np.einsum("mi,mi->m", X @ q, X)
        _, keys, coefs = comp
        out = np.zeros(X.shape[0])
        for key, coef in zip(keys, coefs):
            if key:
                out += coef * np.prod(X[:, key], axis=1)
            else:
                out += coef
        return out

    def __repr__(self):
        if not self._terms:
            return f"Poly(n={self.n}, 0)"
        parts = []
        for k, c in self._terms.items():
            mono = "*".join(f"x{v}^{e}" if e > 1 else f"x{v}" for v, e in sorted(Counter(k).items()))
            parts.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return f"Poly(n={self.n}, " + " + ".join(parts) + ")"

    # serialisation ----------------------------------------------------------
    def to_json(self) -> dict:
        return {"n": self.n, "terms": [{"vars": list(k), "coef": c} for k, c in self._terms.items()]}


class MultilinearPoly:
    """Multilinear polynomial with subset-bitmask keys (``n <= 63``)."""

    def __init__(self, n: int, terms: Mapping[int, float] | Iterable[tuple[int, float]] = ()):
        if not 0 <= n <= MAX_MULTILINEAR_VARS:
            raise ValueError(f"MultilinearPoly supports 0 <= n <= {MAX_MULTILINEAR_VARS}, got {n}")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[int, float] = {}
        limit = 1 << n
        for mask, coef in items:
            mask = int(mask)
            if not 0 <= mask < limit:
                raise ValueError(f"mask {mask:#x} uses bits outside the low {n}")
            acc[mask] = acc.get(mask, 0.0) + float(coef)
        self.n = n
        self._terms = {m: acc[m] for m in sorted(acc) if acc[m] != 0.0}

    @classmethod
    def from_dense(cls, coeffs: np.ndarray) -> "MultilinearPoly":
        coeffs = np.asarray(coeffs, dtype=np.float64)
        n = coeffs.shape[0].bit_length() - 1
        if coeffs.shape != (1 << n,):
            raise ValueError("dense coefficient vector must have length 2**n")
        nz = np.flatnonzero(coeffs)
        return cls(n, zip(nz.tolist(), coeffs[nz].tolist()))

    @classmethod
    def from_sets(cls, n: int, terms: Iterable[tuple[Iterable[int], float]]) -> "MultilinearPoly":
        out = []
        for vars_, coef in terms:
            mask = 0
            for v in vars_:
                if mask >> v & 1:
                    raise ValueError("repeated variable in a multilinear monomial")
                mask |= 1 << v
            out.append((mask, coef))
        return cls(n, out)

    @property
    def terms(self) -> Mapping[int, float]:
        return MappingProxyType(self._terms)

    @property
    def degree(self) -> int:
        return max((m.bit_count() for m in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, mask: int) -> float:
        return self._terms.get(mask, 0.0)

    @property
    def mean(self) -> float:
        return self._terms.get(0, 0.0)

    @property
    def l2_squared(self) -> float:
        return sum(c * c for c in self._terms.values())

    @property
    def variance(self) -> float:
        return sum(c * c for m, c in self._terms.items() if m)

    def influences(self) -> np.ndarray:
        """``Inf_i = sum_{S containing i} c_S**2`` for every ``i``."""
        inf = np.zeros(self.n)
        for m, c in self._terms.items():
            c2 = c * c
            while m:
                low = m & -m
                inf[low.bit_length() - 1] += c2
                m ^= low
        return inf

    def dense(self) -> np.ndarray:
        if self.n > MAX_EXACT_VARS:
            raise ValueError(f"dense form needs n <= {MAX_EXACT_VARS}")
        out = np.zeros(1 << self.n)
        for m, c in self._terms.items():
            out[m] = c
        return out

    def truth_table(self) -> np.ndarray:
        """Values at every vertex, indexed by the encoding in :mod:`ptflab.walsh`."""
        return fwht(self.dense())

    def to_poly(self) -> Poly:
        return Poly(self.n, ((tuple(i for i in range(self.n) if m >> i & 1), c) for m, c in self._terms.items()))

    @cached_property
    def _poly(self) -> Poly:
        return self.to_poly()

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        return self._poly.eval_batch(X)

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = MultilinearPoly(self.n, {0: other})
        if not isinstance(other, MultilinearPoly):
            return NotImplemented
        terms = dict(self._terms)
        for m, c in other._terms.items():
            terms[m] = terms.get(m, 0.0) + c
        return MultilinearPoly(max(self.n, other.n), terms)

    __radd__ = __add__

    def __neg__(self):
        return MultilinearPoly(self.n, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return MultilinearPoly(self.n, {m: c * float(other) for m, c in self._terms.items()})
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other: float):
        return self * (1.0 / other)

    def __eq__(self, other):
        if isinstance(other, MultilinearPoly):
            return self._terms == other._terms
        return NotImplemented

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    def allclose(self, other: "MultilinearPoly", tol: float = 1e-9) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coefficient(k) - other.coefficient(k)) <= tol for k in keys)

    def __repr__(self):
        parts = [f"{c:g}*{{{','.join(str(i) for i in range(self.n) if m >> i & 1)}}}" for m, c in self._terms.items()]
        return f"MultilinearPoly(n={self.n}, " + (" + ".join(parts) or "0") + ")"

    def to_json(self) -> dict:
        return {"n": self.n, "terms": [{"mask": m, "coef": c} for m, c in self._terms.items()]}


AnyPoly = Union[Poly, MultilinearPoly]


def as_poly(p: AnyPoly) -> Poly:
    return p.to_poly() if isinstance(p, MultilinearPoly) else p


# ---------------------------------------------------------------------------
# operations


def evaluate(p: AnyPoly, x) -> float:
    """Evaluate ``p`` at ``x``, summing terms in ascending key order."""
    x = [float(v) for v in x]
    if len(x) != p.n:
        raise ValueError(f"point has {len(x)} coordinates, polynomial has n={p.n}")
    total = 0.0
    if isinstance(p, MultilinearPoly):
        for m, c in p.terms.items():
            term = c
            i = 0
            while m:
                if m & 1:
                    term *= x[i]
                m >>= 1
                i += 1
            total += term
        return total
    for key, c in p.terms.items():
        total += c * math.prod(x[v] for v in key)
    return total


def multilinearize(p: AnyPoly) -> MultilinearPoly:
    """The unique multilinear polynomial agreeing with ``p`` on {-1,1}^n.

    Each monomial reduces to the product of the variables occurring an odd
    number of times.
    """
    if isinstance(p, MultilinearPoly):
        return p
    if p.n > MAX_MULTILINEAR_VARS:
        raise ValueError(f"multilinearize supports n <= {MAX_MULTILINEAR_VARS}, got {p.n}")
    out: dict[int, float] = {}
    for key, c in p.terms.items():
        mask = 0
        for v in key:
            mask ^= 1 << v
        out[mask] = out.get(mask, 0.0) + c
    return MultilinearPoly(p.n, out)


class Estimate(NamedTuple):
    value: float
    stderr: float

    def __float__(self):
        return float(self.value)


def bernoulli_moment(p: AnyPoly, t: int, mode: str = "exact", samples: int = 100_000,
                     rng: np.random.Generator | None = None) -> Estimate:
    """``|p|_{B,t} = E_B[|p(B)|^t]^(1/t)`` over uniform {-1,1}^n.

    ``mode="exact"`` enumerates all vertices (n <= 24); ``mode="mc"`` samples
    and reports a delta-method standard error.
    """
    if t < 1 or int(t) != t or t % 2:
        raise ValueError("t must be a positive even integer")
    q = multilinearize(p)
    if mode == "exact":
        if q.n > MAX_EXACT_VARS:
            raise ValueError(f"exact mode needs n <= {MAX_EXACT_VARS}, got n={q.n}")
        vals = q.truth_table()
        return Estimate(float(np.mean(vals ** t)) ** (1.0 / t), 0.0)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    rng = rng if rng is not None else np.random.default_rng(0)
    X = rng.choice(np.array([-1.0, 1.0]), size=(samples, q.n))
    w = q.eval_batch(X) ** t
    m = float(w.mean())
    se = float(w.std(ddof=1) / math.sqrt(samples))
    if m == 0.0:
        return Estimate(0.0, 0.0)
    return Estimate(m ** (1.0 / t), (1.0 / t) * m ** (1.0 / t - 1.0) * se)


def gaussian_l2(p: AnyPoly) -> float:
    """``|p|_2`` under the standard Gaussian, via Parseval on the Hermite expansion."""
    from .hermite import expand

    return math.sqrt(expand(as_poly(p)).l2_squared())


def influence(p: AnyPoly, i: int) -> float:
    """``Inf_i(p) = |dp/dx_i|_2^2 = sum_a a_i c_a(p)^2``."""
    if not 0 <= i < p.n:
        raise IndexError(f"variable {i} out of range for n={p.n}")
    if isinstance(p, MultilinearPoly):
        return float(sum(c * c for m, c in p.terms.items() if m >> i & 1))
    from .hermite import expand

    return sum(a[i] * c * c for a, c in expand(p).coeffs.items() if len(a) > i)


def influence_by_restriction(p: MultilinearPoly, i: int) -> float:
    """``E_A[var_{a_i} p(A)]`` by enumerating the hypercube (independent of coefficients)."""
    if not 0 <= i < p.n:
        raise IndexError(f"variable {i} out of range for n={p.n}")
    vals = p.truth_table()
    v = np.arange(vals.size)
    plus = vals[(v >> i & 1) == 0]
    minus = vals[((v >> i & 1) == 0).nonzero()[0] | (1 << i)]
    return float(np.mean((plus - minus) ** 2) / 4.0)


def is_tau_regular(p: MultilinearPoly, tau: float) -> tuple[bool, int | None]:
    """Whether every influence is at most ``tau * var_A(p)``.

    Returns ``(True, None)`` or ``(False, i)`` with ``i`` the lowest index of
    maximal influence.
    """
    var = p.variance
    if var <= 0.0:
        raise ValueError("tau-regularity is undefined for a zero-variance polynomial")
    inf = p.influences()
    i = int(np.argmax(inf))
    if inf[i] <= tau * var:
        return True, None
    return False, i


def restrict(p: MultilinearPoly, assignment: Mapping[int, int], reindex: bool = True
             ) -> tuple[MultilinearPoly, list[int]]:
    """Fix the coordinates in ``assignment`` to +-1.

    Returns the restricted polynomial and ``index_map`` with
    ``index_map[new] = old``.  With ``reindex=False`` the variable indices are
    kept and ``index_map`` is the identity over the free coordinates.
    """
    fixed_mask = 0
    sign_mask = 0
    for i, val in assignment.items():
        if not 0 <= i < p.n:
            raise IndexError(f"variable {i} out of range for n={p.n}")
        if val not in (1, -1):
            raise ValueError(f"assigned value for x{i} must be +-1, got {val!r}")
        fixed_mask |= 1 << i
        if val == -1:
            sign_mask |= 1 << i
    free = [i for i in range(p.n) if not fixed_mask >> i & 1]
    out: dict[int, float] = {}
    for m, c in p.terms.items():
        if (m & sign_mask).bit_count() & 1:
            c = -c
        rest = m & ~fixed_mask
        out[rest] = out.get(rest, 0.0) + c
    if not reindex:
        return MultilinearPoly(p.n, out), free
    remap = {old: new for new, old in enumerate(free)}
    re = {}
    for m, c in out.items():
        nm = 0
        while m:
            low = m & -m
            nm |= 1 << remap[low.bit_length() - 1]
            m ^= low
        re[nm] = c
    return MultilinearPoly(len(free), re), free


def compose(h: AnyPoly, qs: Sequence[AnyPoly]) -> Poly:
    """``h(q_1(x), ..., q_m(x))`` as a polynomial in x."""
    h = as_poly(h)
    qs = [as_poly(q) for q in qs]
    if len(qs) != h.n:
        raise ValueError(f"h has {h.n} variables but {len(qs)} inner polynomials were given")
    n = max((q.n for q in qs), default=0)
    out = Poly(n)
    for key, c in h.terms.items():
        term = Poly.const(c, n)
        for v in key:
            term = term * qs[v]
        out = out + term
    return out


# ---------------------------------------------------------------------------
# serialisation


def to_json(p: AnyPoly) -> str:
    return json.dumps(p.to_json())


def from_json(data: str | dict) -> AnyPoly:
    if isinstance(data, str):
        data = json.loads(data)
    n = int(data["n"])
    terms = data.get("terms", [])
    if terms and all("mask" in t for t in terms):
        return MultilinearPoly(n, [(int(t["mask"]), float(t["coef"])) for t in terms])
    if any("mask" in t for t in terms):
        raise ValueError("cannot mix 'mask' and 'vars' terms")
    return Poly(n, [(tuple(int(v) for v in t["vars"]), float(t["coef"])) for t in terms])


# ---------------------------------------------------------------------------
# random instances


def random_poly(n: int, d: int, rng: np.random.Generator, family: str = "dense") -> AnyPoly:
    """Random polynomial with iid N(0,1) coefficients on every monomial of degree <= d.

    ``family`` is ``"dense"`` (all monomials), ``"multilinear"`` (subsets,
    returned as :class:`MultilinearPoly`) or ``"homogeneous"`` (all monomials of
    degree exactly ``d``).
    """
    from itertools import combinations, combinations_with_replacement

    if family == "multilinear":
        keys = [c for k in range(d + 1) for c in combinations(range(n), k)]
        coefs = rng.standard_normal(len(keys))
        return MultilinearPoly.from_sets(n, zip(keys, coefs.tolist()))
    if family == "dense":
        keys = [c for k in range(d + 1) for c in combinations_with_replacement(range(n), k)]
    elif family == "homogeneous":
        keys = list(combinations_with_replacement(range(n), d))
    else:
        raise ValueError(f"unknown polynomial family {family!r}")
    coefs = rng.standard_normal(len(keys))
    return Poly(n, zip(keys, coefs.tolist()))


__all__ = [
    "Poly", "MultilinearPoly", "Estimate", "as_poly", "evaluate", "multilinearize",
    "bernoulli_moment", "gaussian_l2", "influence", "influence_by_restriction",
    "is_tau_regular", "restrict", "compose", "to_json", "from_json", "random_poly",
    "popcounts", "vertex_matrix",
]
