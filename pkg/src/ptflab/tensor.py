"""Symmetric tensors, contraction, wedge products and low-rank machinery.

Dense tensors are plain numpy arrays.  Rank-0 results (full contractions) are
returned as 0-d arrays.
"""
from __future__ import annotations

import enum
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .poly import AnyPoly, Poly, as_poly

MAX_WEDGE = 6


# ---------------------------------------------------------------------------
# symmetric tensors


@dataclass(frozen=True)
class SymmetricTensor:
    """Symmetric rank-``d`` tensor over ``n`` coordinates.

    Only one representative per permutation orbit is stored, keyed by the
    sorted index tuple.
    """

    n: int
    d: int
    data: Mapping[tuple, float] = field(default_factory=dict)

    def __getitem__(self, idx) -> float:
        return self.data.get(tuple(sorted(idx)), 0.0)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n,) * self.d)
        for key, val in self.data.items():
            for perm in set(itertools.permutations(key)):
                out[perm] = val
        return out

    def l2_norm(self) -> float:
        # each orbit contributes multinomial(d; counts) copies
        total = 0.0
        for key, val in self.data.items():
            mult = math.factorial(self.d)
            for c in Counter(key).values():
                mult //= math.factorial(c)
            total += mult * val * val
        return math.sqrt(total)

    def apply(self, x) -> float:
        """``A(x, x, ..., x)``."""
        x = np.asarray(x, dtype=np.float64)
        total = 0.0
        for key, val in self.data.items():
            mult = math.factorial(self.d)
            for c in Counter(key).values():
                mult //= math.factorial(c)
            total += mult * val * float(np.prod(x[list(key)]))
        return total


def tensor_of(p: AnyPoly) -> SymmetricTensor:
    """Tensor of ``d``-th partial derivatives of a homogeneous degree-``d`` polynomial."""
    p = as_poly(p)
    if not p.is_homogeneous():
        raise ValueError("tensor_of needs a homogeneous polynomial")
    d = p.degree
    data = {}
    for key, c in p.terms.items():
        # D_key applied to c * x^key leaves c * prod(multiplicity!)
        data[key] = c * math.prod(math.factorial(m) for m in Counter(key).values())
    return SymmetricTensor(p.n, d, data)


def contract(A: np.ndarray, B: np.ndarray, pairs: Sequence[tuple[int, int]] = ()) -> np.ndarray:
    """Sum over the paired axes; no pairs gives the outer product."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    ax_a = [a for a, _ in pairs]
    ax_b = [b for _, b in pairs]
    for a, b in pairs:
        if not (0 <= a < A.ndim and 0 <= b < B.ndim):
            raise ValueError(f"axis pair {(a, b)} out of range")
        if A.shape[a] != B.shape[b]:
            raise ValueError(f"axis lengths differ: A[{a}]={A.shape[a]}, B[{b}]={B.shape[b]}")
    if len(set(ax_a)) != len(ax_a) or len(set(ax_b)) != len(ax_b):
        raise ValueError("an axis may be paired at most once")
    return np.asarray(np.tensordot(A, B, axes=(ax_a, ax_b)))


def outer(*factors: np.ndarray) -> np.ndarray:
    out = np.asarray(1.0)
    for f in factors:
        out = np.multiply.outer(out, np.asarray(f, dtype=np.float64))
    return out


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def wedge(A: np.ndarray, wedge_axes: Sequence[int]) -> np.ndarray:
    """Antisymmetrise ``A`` over ``wedge_axes``: ``sum_sigma sgn(sigma) A[permuted]``."""
    A = np.asarray(A, dtype=np.float64)
    k = len(wedge_axes)
    if k > MAX_WEDGE:
        raise ValueError(f"wedge over {k} axes exceeds the limit {MAX_WEDGE}")
    if len(set(wedge_axes)) != k or any(not 0 <= a < A.ndim for a in wedge_axes):
        raise ValueError("wedge axes must be distinct valid axes")
    if len({A.shape[a] for a in wedge_axes}) > 1:
        raise ValueError("wedge axes must have equal lengths")
    out = np.zeros_like(A)
    for perm in itertools.permutations(range(k)):
        axes = list(range(A.ndim))
        for src, dst in zip(wedge_axes, (wedge_axes[j] for j in perm)):
            axes[src] = dst
        out += _perm_sign(perm) * np.transpose(A, axes)
    return out


def elementary_symmetric(values: Sequence[float], k: int) -> float:
    e = np.zeros(k + 1)
    e[0] = 1.0
    for v in values:
        e[1:] = e[1:] + v * e[:-1]
    return float(e[k])


def wedge_norm(B: np.ndarray, k: int) -> float:
    """``|wedge_{i_1..i_k} B_{i_1 j_1} ... B_{i_k j_k}|_2`` without forming the tensor.

    By Cauchy-Binet it equals ``k! * sqrt(e_k(s_1**2, ..., s_r**2))`` where
    ``s`` are the singular values of ``B`` and ``e_k`` the elementary
    symmetric polynomial.
    """
    B = np.asarray(B, dtype=np.float64)
    if k == 0:
        return 1.0
    gram = B @ B.T if B.shape[0] <= B.shape[1] else B.T @ B
    evals, _ = jacobi_eigh(gram)
    return math.factorial(k) * math.sqrt(max(elementary_symmetric(np.clip(evals, 0.0, None), k), 0.0))


def wedge_power(B: np.ndarray, k: int) -> np.ndarray:
    """Explicit ``wedge_{i} (B tensor ... tensor B)`` with axes ``(i_1, j_1, ..., i_k, j_k)``."""
    T = outer(*([B] * k))
    return wedge(T, [2 * l for l in range(k)])


# ---------------------------------------------------------------------------
# symmetric eigendecomposition


def jacobi_eigh(S: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Iterates row-by-row sweeps until the off-diagonal Frobenius norm is below
    ``tol`` times the matrix norm.  Eigenvalues are returned in descending
    order; each eigenvector column has its first nonzero entry positive.
    """
    A = np.array(S, dtype=np.float64, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.allclose(A, A.T, atol=1e-12 * max(1.0, float(np.abs(A).max(initial=0.0)))):
        raise ValueError("matrix is not symmetric")
    A = (A + A.T) / 2
    n = A.shape[0]
    V = np.eye(n)
    scale = float(np.linalg.norm(A)) or 1.0
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(A - np.diag(np.diag(A))))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-18 * (abs(A[p, p]) + abs(A[q, q])) or apq == 0.0:
                    # negligible pivot: zero it instead of dividing by it
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    evals = np.diag(A).copy()
    order = np.argsort(-evals, kind="stable")
    evals = evals[order]
    V = V[:, order]
    for j in range(n):
        nz = np.flatnonzero(np.abs(V[:, j]) > 1e-14)
        if nz.size and V[nz[0], j] < 0:
            V[:, j] = -V[:, j]
    return evals, V


# ---------------------------------------------------------------------------
# low-rank approximation


class LowRankResult(NamedTuple):
    factors: list  # list of (V, W) with B ~ sum outer(V, W)
    residual: float
    wedge_norm: float

    def approximation(self, shape) -> np.ndarray:
        out = np.zeros(shape)
        for v, w in self.factors:
            out += np.outer(v, w)
        return out


def _orthonormal_basis(M: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis for the column span of ``M`` (modified Gram-Schmidt)."""
    cols = []
    scale = float(np.abs(M).max(initial=0.0))
    for j in range(M.shape[1]):
        v = M[:, j].astype(np.float64).copy()
        for _ in range(2):
            for q in cols:
                v -= (q @ v) * q
        nv = float(np.linalg.norm(v))
        if nv > rtol * max(scale, 1e-300):
            cols.append(v / nv)
    return np.array(cols).T if cols else np.zeros((M.shape[0], 0))


def low_rank_approx(B: np.ndarray, k: int, eps: float, rng: np.random.Generator,
                    retries: int = 8) -> LowRankResult:
    """Approximate ``B`` by ``k - 1`` rank-one terms using Gaussian probes.

    Each attempt draws probes ``X^1..X^{k-1}``, forms ``V^l = B X^l`` and keeps
    the part of ``B`` inside ``span(V)``.  The best of ``retries`` attempts is
    returned.  When the ``(k-1)``-fold wedge is already below
    ``eps**(k-1)`` the ``k - 1`` construction is tried as well.
    """
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2:
        raise ValueError("B must be a matrix")
    if k < 1:
        raise ValueError("k must be at least 1")
    wn = wedge_norm(B, k) if k <= min(B.shape) else 0.0
    frob = float(np.linalg.norm(B))
    if frob == 0.0:
        return LowRankResult([], 0.0, 0.0)
    if k == 1:
        return LowRankResult([], frob, wn)
    best: LowRankResult | None = None
    for _ in range(retries):
        X = rng.standard_normal((B.shape[1], k - 1))
        Q = _orthonormal_basis(B @ X)
        resid = B - Q @ (Q.T @ B)
        r = float(np.linalg.norm(resid))
        if best is None or r < best.residual:
            factors = [(Q[:, l].copy(), B.T @ Q[:, l]) for l in range(Q.shape[1])]
            best = LowRankResult(factors, r, wn)
    if k > 2 and wedge_norm(B, k - 1) < eps ** (k - 1):
        sub = low_rank_approx(B, k - 1, eps, rng, retries)
        if sub.residual < best.residual:
            best = LowRankResult(sub.factors, sub.residual, wn)
    return best


def svd_oracle_residual(B: np.ndarray, rank: int) -> float:
    """Best possible Frobenius error of a rank-``rank`` approximation."""
    s = np.linalg.svd(np.asarray(B, dtype=np.float64), compute_uv=False)
    return float(np.sqrt(np.sum(s[rank:] ** 2)))


# ---------------------------------------------------------------------------
# quadratic decomposition


class QuadraticDecomposition(NamedTuple):
    factors: list  # list of (a, b) degree-1 Polys
    remainder: Poly

    def reconstruct(self) -> Poly:
        out = self.remainder
        for a, b in self.factors:
            out = out + a * b
        return out


def quadratic_form(p: AnyPoly) -> np.ndarray:
    """Symmetric matrix ``Q`` with ``x^T Q x`` equal to the degree-2 part of ``p``."""
    p = as_poly(p)
    Q = np.zeros((p.n, p.n))
    for key, c in p.terms.items():
        if len(key) == 2:
            i, j = key
            if i == j:
                Q[i, i] += c
            else:
                Q[i, j] += c / 2
                Q[j, i] += c / 2
    return Q


def decompose_quadratic(p: AnyPoly, rtol: float = 1e-13) -> QuadraticDecomposition:
    """Write a degree-2 polynomial as ``sum_i a_i b_i + remainder``.

    Each nonzero eigenpair ``(lam, v)`` of the quadratic form contributes
    ``a = lam <v, x>`` and ``b = <v, x>``; the remainder is the affine part.
    """
    p = as_poly(p)
    if p.degree != 2:
        raise ValueError(f"expected a degree-2 polynomial, got degree {p.degree}")
    evals, V = jacobi_eigh(quadratic_form(p))
    top = float(np.abs(evals).max())
    factors = []
    for lam, v in zip(evals, V.T):
        if abs(lam) <= rtol * top:
            continue
        b = Poly(p.n, {(i,): float(v[i]) for i in range(p.n)})
        factors.append((b * float(lam), b))
    remainder = Poly(p.n, {k: c for k, c in p.terms.items() if len(k) < 2})
    return QuadraticDecomposition(factors, remainder)


# ---------------------------------------------------------------------------
# ordinal weights


class Order(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


@dataclass(frozen=True, order=False)
class OrdinalPoly:
    """Polynomial in ``omega`` with non-negative integer coefficients.

    ``coeffs[j]`` is the coefficient of ``omega**j``.
    """

    coeffs: tuple = ()

    def __post_init__(self):
        c = [int(v) for v in self.coeffs]
        if any(v < 0 for v in c):
            raise ValueError("ordinal coefficients must be non-negative")
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def from_terms(cls, terms: Mapping[int, int]) -> "OrdinalPoly":
        deg = max(terms, default=-1)
        c = [0] * (deg + 1)
        for e, v in terms.items():
            c[e] += v
        return cls(tuple(c))

    @property
    def coefficient_sum(self) -> int:
        return sum(self.coeffs)

    def __lt__(self, other):
        return ordinal_compare(self, other) is Order.LESS

    def __le__(self, other):
        return ordinal_compare(self, other) is not Order.GREATER

    def __gt__(self, other):
        return ordinal_compare(self, other) is Order.GREATER

    def __ge__(self, other):
        return ordinal_compare(self, other) is not Order.LESS

    def __str__(self):
        parts = [f"{c}w^{e}" if e > 1 else (f"{c}w" if e == 1 else str(c))
                 for e, c in reversed(list(enumerate(self.coeffs))) if c]
        return " + ".join(parts) or "0"


def ordinal_compare(a: OrdinalPoly, b: OrdinalPoly) -> Order:
    """Compare ``a(omega)`` with ``b(omega)`` by the leading coefficient of ``a - b``."""
    for j in range(max(len(a.coeffs), len(b.coeffs)) - 1, -1, -1):
        x = a.coeffs[j] if j < len(a.coeffs) else 0
        y = b.coeffs[j] if j < len(b.coeffs) else 0
        if x != y:
            return Order.GREATER if x > y else Order.LESS
    return Order.EQUAL


def scale_budget(i: int, N: int, c: float) -> int:
    """Integer budget ``ceil(4 * 3**i * (N+1) / c)`` for the term at 1-based position ``i``."""
    return math.ceil(4 * 3 ** i * (N + 1) / c)


def drop_threshold(i: int, N: int, c: float) -> int:
    return math.ceil(2 * 3 ** i * (N + 1) / c)


def decomposition_weight(degrees: Sequence[int], scales: Sequence[int], N: int, c: float) -> OrdinalPoly:
    """``w = sum_i omega**deg(q_i) * (budget_i - a_i)`` with 1-based ``i``."""
    if len(degrees) != len(scales):
        raise ValueError("degrees and scales must have equal length")
    terms: dict[int, int] = {}
    for i, (deg, a) in enumerate(zip(degrees, scales), start=1):
        budget = scale_budget(i, N, c)
        if not 0 <= a < budget:
            raise ValueError(f"scale a_{i}={a} outside [0, {budget})")
        terms[deg] = terms.get(deg, 0) + budget - a
    return OrdinalPoly.from_terms(terms)


@dataclass
class RewriteState:
    qs: list  # list of Poly
    scales: list  # list of int

    def weight(self, N: int, c: float) -> OrdinalPoly:
        return decomposition_weight([q.degree for q in self.qs], self.scales, N, c)


def _rewrite_step(state: RewriteState, N: int, c: float) -> RewriteState | None:
    qs, a = state.qs, state.scales
    m = len(qs)
    # drop the last term whose scale has passed its threshold
    for i in range(m - 1, -1, -1):
        if a[i] >= drop_threshold(i + 1, N, c):
            nq = qs[:i] + qs[i + 1:]
            na = a[:i] + a[i + 1:]
            na = [min(v, scale_budget(j + 1, N, c) - 1) for j, v in enumerate(na)]
            return RewriteState(nq, na)
    # restore non-increasing degree order
    for i in range(m - 1):
        if qs[i + 1].degree > qs[i].degree:
            nq = list(qs)
            nq[i], nq[i + 1] = nq[i + 1], nq[i]
            na = list(a)
            na[i] = na[i + 1] = 0
            return RewriteState(nq, na)
    # split the last quadratic into normalised linear forms
    for i in range(m - 1, -1, -1):
        if qs[i].degree == 2:
            forms = []
            for _, b in decompose_quadratic(qs[i]).factors:
                forms.append(b)
            forms.extend(t for t in [decompose_quadratic(qs[i]).remainder.homogeneous_part(1)] if not t.is_zero())
            forms = [f / math.sqrt(sum(v * v for v in f.terms.values())) for f in forms]
            nq = qs[:i] + qs[i + 1:] + forms
            na = a[:i] + a[i + 1:] + [0] * len(forms)
            na = [min(v, scale_budget(j + 1, N, c) - 1) for j, v in enumerate(na)]
            return RewriteState(nq, na)
    # otherwise refine the scale of the last term
    if m:
        na = list(a)
        na[-1] += 1
        return RewriteState(list(qs), na)
    return None


def quadratic_rewrite_chain(p: AnyPoly, N: int = 1, c: float = 1.0, max_steps: int = 1_000_000
                            ) -> list[OrdinalPoly]:
    """Run a deterministic rewrite driver on the decomposition ``p = h(q)`` with ``q_1 = p``.

    Steps drop exhausted terms, restore degree order, split quadratics into
    linear forms and refine scales.  Returns the weight after every state;
    every step strictly lowers the weight.
    """
    p = as_poly(p)
    if p.degree < 1:
        raise ValueError("need a non-constant polynomial")
    state = RewriteState([p], [0])
    weights = [state.weight(N, c)]
    for _ in range(max_steps):
        state = _rewrite_step(state, N, c)
        if state is None:
            return weights
        weights.append(state.weight(N, c))
    raise RuntimeError("rewrite chain did not terminate within max_steps")


__all__ = [
    "SymmetricTensor", "tensor_of", "contract", "outer", "wedge", "wedge_norm", "wedge_power",
    "elementary_symmetric", "jacobi_eigh", "LowRankResult", "low_rank_approx", "svd_oracle_residual",
    "QuadraticDecomposition", "quadratic_form", "decompose_quadratic", "Order", "OrdinalPoly",
    "ordinal_compare", "scale_budget", "drop_threshold", "decomposition_weight", "quadratic_rewrite_chain",
]
