"""Monte Carlo property checks: anticoncentration, tails and hypercontractivity."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import _parallel
from ..hermite import gaussian_norm
from ..kwise import Seed
from ..poly import AnyPoly, Poly, as_poly, bernoulli_moment, gaussian_l2, multilinearize

MC_BLOCK = 1 << 15
TAIL_LEVELS = (2, 4, 8, 16)


@dataclass(frozen=True)
class FrequencyRow:
    eps: float
    frequency: float
    stderr: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.frequency <= self.bound + 4 * self.stderr


def _gaussian_blocks(n: int, samples: int, seed: Seed, fn, threads=None):
    """Apply ``fn(X)`` to Gaussian sample blocks and sum the returned arrays in block order."""
    sizes = _parallel.block_sizes(samples, MC_BLOCK)

    def work(b):
        X = _parallel.block_rng(seed.master, seed.stream, b).standard_normal((sizes[b], n))
        return np.asarray(fn(X), dtype=np.float64)

    return _parallel.ordered_sum(_parallel.run_blocks(work, len(sizes), threads))


def _freq(count: np.ndarray, samples: int) -> tuple[np.ndarray, np.ndarray]:
    f = count / samples
    return f, np.sqrt(f * (1.0 - f) / samples)


def anticoncentration_check(p: AnyPoly, eps_list: Sequence[float], samples: int = 100_000,
                            seed: Seed = Seed(0, 0), threads: int | None = None) -> list[FrequencyRow]:
    """Empirical ``Pr(|p(X)| <= eps |p|_2)`` against the envelope ``8 d eps**(1/d)``."""
    q = as_poly(p)
    norm = gaussian_l2(q)
    d = max(q.degree, 1)
    eps = np.asarray(eps_list, dtype=np.float64)

    def fn(X):
        v = np.abs(q.eval_batch(X))
        return (v[:, None] <= eps[None, :] * norm).sum(axis=0)

    f, se = _freq(_gaussian_blocks(q.n, samples, seed, fn, threads), samples)
    return [FrequencyRow(float(e), float(fi), float(si), 8 * d * float(e) ** (1.0 / d))
            for e, fi, si in zip(eps, f, se)]


@dataclass(frozen=True)
class TailReport:
    tails: dict  # N -> (frequency, stderr)
    weak_lower: float
    weak_stderr: float
    degree: int

    @property
    def weak_bound(self) -> float:
        return 9.0 ** (-self.degree) / 2

    @property
    def weak_holds(self) -> bool:
        return self.weak_lower >= self.weak_bound - 4 * self.weak_stderr


def tail_and_weak_anticoncentration(p: AnyPoly, samples: int = 100_000, seed: Seed = Seed(0, 0),
                                    levels: Sequence[float] = TAIL_LEVELS,
                                    threads: int | None = None) -> TailReport:
    """``Pr(|p(X)| > N |p|_2)`` for each level and ``Pr(|p(X)| >= |p|_2 / 2)``."""
    q = as_poly(p)
    norm = gaussian_l2(q)
    lv = np.asarray(levels, dtype=np.float64)

    def fn(X):
        v = np.abs(q.eval_batch(X))
        return np.concatenate([(v[:, None] > lv[None, :] * norm).sum(axis=0), [(v >= norm / 2).sum()]])

    f, se = _freq(_gaussian_blocks(q.n, samples, seed, fn, threads), samples)
    tails = {float(N): (float(f[i]), float(se[i])) for i, N in enumerate(lv)}
    return TailReport(tails, float(f[-1]), float(se[-1]), q.degree)


# ---------------------------------------------------------------------------
# strong anticoncentration


def _as_components(p) -> list[Poly]:
    if isinstance(p, (list, tuple)):
        return [as_poly(c) for c in p]
    return [as_poly(p)]


def strong_anticoncentration_check(polys: Sequence, eps_list: Sequence[float], samples: int = 100_000,
                                   seed: Seed = Seed(0, 0), constant: float = 50.0,
                                   threads: int | None = None) -> list[FrequencyRow]:
    """Frequency of ``prod_j |A^j(X)|_2 < eps * |wedge_i prod_j D_{i_j} A^j(X)|_2``.

    Each entry of ``polys`` is a scalar polynomial or a list of polynomials
    (the flattened entries of a tensor-valued polynomial); ``k = len(polys)``
    must be 1 or 2.  For ``k = 1`` the event is ``|A(X)| < eps |DA(X)|``.
    For ``k = 2`` the wedge norm squared is
    ``2 (|M1|^2 |M2|^2 - |M1^T M2|^2)`` with ``M_j`` the Jacobian of ``A^j``.
    The bound column is ``constant * 2**(sum d_j) * eps * log(1/eps)**k``.
    """
    comps = [_as_components(p) for p in polys]
    k = len(comps)
    if k not in (1, 2):
        raise ValueError("strong anticoncentration checks support k in {1, 2}")
    n = max(c.n for cs in comps for c in cs)
    comps = [[c.with_n(n) for c in cs] for cs in comps]
    grads = [[c.gradient() for c in cs] for cs in comps]
    dsum = sum(max(c.degree for c in cs) for cs in comps)
    eps = np.asarray(eps_list, dtype=np.float64)

    def fn(X):
        vals = []
        jac = []
        for cs, gs in zip(comps, grads):
            v = np.stack([c.eval_batch(X) for c in cs], axis=1)  # (S, s_j)
            M = np.stack([np.stack([g.eval_batch(X) for g in gi], axis=1) for gi in gs], axis=2)  # (S, n, s_j)
            vals.append(np.linalg.norm(v, axis=1))
            jac.append(M)
        lhs = np.prod(vals, axis=0)
        if k == 1:
            wedge = np.sqrt(np.sum(jac[0] ** 2, axis=(1, 2)))
        else:
            a = np.sum(jac[0] ** 2, axis=(1, 2))
            b = np.sum(jac[1] ** 2, axis=(1, 2))
            cross = np.einsum("sia,sib->sab", jac[0], jac[1])
            wedge = np.sqrt(np.maximum(2.0 * (a * b - np.sum(cross ** 2, axis=(1, 2))), 0.0))
        return (lhs[:, None] < eps[None, :] * wedge[:, None]).sum(axis=0)

    f, se = _freq(_gaussian_blocks(n, samples, seed, fn, threads), samples)
    return [FrequencyRow(float(e), float(fi), float(si),
                         constant * 2.0 ** dsum * float(e) * math.log(1.0 / float(e)) ** k)
            for e, fi, si in zip(eps, f, se)]


# ---------------------------------------------------------------------------
# hypercontractivity


@dataclass(frozen=True)
class HypercontractivityRow:
    measure: str
    t: int
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12) + 1e-15


def hypercontractivity_check(p: AnyPoly, t: int = 4) -> list[HypercontractivityRow]:
    """``|p|_t <= (t-1)**(d/2) |p|_2`` under the Bernoulli and Gaussian measures (exact)."""
    q = as_poly(p)
    ml = multilinearize(q)
    out = []
    if ml.n <= 24:
        d = ml.degree
        out.append(HypercontractivityRow("bernoulli", t, bernoulli_moment(ml, t).value,
                                         (t - 1) ** (d / 2) * bernoulli_moment(ml, 2).value))
    d = q.degree
    out.append(HypercontractivityRow("gaussian", t, gaussian_norm(q, t), (t - 1) ** (d / 2) * gaussian_l2(q)))
    return out


__all__ = [
    "FrequencyRow", "anticoncentration_check", "TailReport", "tail_and_weak_anticoncentration",
    "strong_anticoncentration_check", "HypercontractivityRow", "hypercontractivity_check",
]
