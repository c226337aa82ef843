"""Noise and average sensitivity of polynomial threshold functions.

``f = sgn(p)`` with ``sgn(0) = +1``.  Hypercube quantities have exact modes
based on the full truth table; Gaussian quantities are Monte Carlo.
"""
from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np

from .. import _parallel
from ..kwise import Seed
from ..poly import AnyPoly, MultilinearPoly, Poly, as_poly, multilinearize
from ..walsh import popcounts, sign, walsh_coefficients
from .reports import SensitivityReport

MAX_NS_EXACT = 13
MAX_AS_EXACT = 20
MC_BLOCK = 1 << 14


def sign_table(p: AnyPoly) -> np.ndarray:
    """``sgn p`` at every hypercube vertex (vertex encoding of :mod:`ptflab.walsh`)."""
    return sign(multilinearize(p).truth_table())


def _mean_se(total: float, total_sq: float, count: int) -> tuple[float, float]:
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0) * count / max(count - 1, 1)
    return mean, math.sqrt(var / count)


def _mc(work, samples: int, threads) -> tuple[float, float]:
    sizes = _parallel.block_sizes(samples, MC_BLOCK)
    parts = _parallel.run_blocks(lambda b: work(b, sizes[b]), len(sizes), threads)
    acc = _parallel.ordered_sum([np.asarray(x) for x in parts])
    return _mean_se(float(acc[0]), float(acc[1]), samples)


def _check_delta(delta: float):
    if not 0.0 <= delta <= 1.0 or math.isnan(delta):
        raise ValueError(f"delta must lie in [0, 1], got {delta}")


# ---------------------------------------------------------------------------
# hypercube noise sensitivity


def ns_flip_counts(p: AnyPoly, threads: int | None = None) -> np.ndarray:
    """``D[w]`` = number of (vertex, flip pattern of weight w) pairs with a sign change."""
    s = sign_table(p)
    n = s.size.bit_length() - 1
    v = np.arange(s.size, dtype=np.int64)
    weights = popcounts(n)
    chunk = 256
    starts = list(range(0, s.size, chunk))

    def work(b):
        F = np.arange(starts[b], min(starts[b] + chunk, s.size), dtype=np.int64)
        diff = np.count_nonzero(s[v[None, :] ^ F[:, None]] != s[None, :], axis=1)
        return np.bincount(weights[F], weights=diff, minlength=n + 1)

    parts = _parallel.run_blocks(work, len(starts), threads)
    return np.rint(np.sum(parts, axis=0)).astype(np.int64)


def noise_sensitivity(p: AnyPoly, delta: float, mode: str = "exact", samples: int = 100_000,
                      seed: Seed = Seed(0, 0), threads: int | None = None) -> SensitivityReport:
    """``ns_delta(sgn p) = Pr(f(A) != f(B))`` with ``B`` flipping each sign w.p. ``delta``."""
    _check_delta(delta)
    t0 = time.perf_counter()
    n = p.n
    if mode == "exact":
        if n > MAX_NS_EXACT:
            raise ValueError(f"exact noise sensitivity needs n <= {MAX_NS_EXACT}, got {n}")
        D = ns_flip_counts(p, threads)
        w = np.arange(n + 1)
        est = float(np.sum(D * delta ** w * (1.0 - delta) ** (n - w)) / (1 << n))
        return SensitivityReport("ns", est, 0.0, "exact", "", (time.perf_counter() - t0) * 1e3, parameter=delta)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    q = as_poly(p)

    def work(b, size):
        rng = _parallel.block_rng(seed.master, seed.stream, b)
        A = rng.choice(np.array([-1.0, 1.0]), size=(size, n))
        flips = rng.random((size, n)) < delta
        B = np.where(flips, -A, A)
        d = (sign(q.eval_batch(A)) != sign(q.eval_batch(B))).astype(np.float64)
        return d.sum(), d.sum()

    est, se = _mc(work, samples, threads)
    return SensitivityReport("ns", est, se, samples, seed.master, (time.perf_counter() - t0) * 1e3, parameter=delta)


def noise_sensitivity_fourier(p: AnyPoly, delta: float) -> float:
    """``sum_S fhat(S)**2 (1 - (1 - 2 delta)**|S|) / 2`` from the Walsh spectrum of ``sgn p``."""
    _check_delta(delta)
    fhat = walsh_coefficients(sign_table(p).astype(np.float64))
    sizes = popcounts(p.n)
    return float(np.sum(fhat ** 2 * (1.0 - (1.0 - 2.0 * delta) ** sizes)) / 2.0)


# ---------------------------------------------------------------------------
# Gaussian noise sensitivity


def gaussian_noise_sensitivity(p: AnyPoly, delta: float, samples: int = 100_000,
                               seed: Seed = Seed(0, 0), threads: int | None = None) -> SensitivityReport:
    """``Pr(f(X) != f(Y))`` with ``Y = (1-delta) X + sqrt(1-(1-delta)**2) Z``."""
    _check_delta(delta)
    t0 = time.perf_counter()
    q = as_poly(p)
    rho = 1.0 - delta
    tau = math.sqrt(max(1.0 - rho * rho, 0.0))

    def work(b, size):
        rng = _parallel.block_rng(seed.master, seed.stream, b)
        X = rng.standard_normal((size, q.n))
        Z = rng.standard_normal((size, q.n))
        Y = X if delta == 0.0 else rho * X + tau * Z
        d = (sign(q.eval_batch(X)) != sign(q.eval_batch(Y))).astype(np.float64)
        return d.sum(), d.sum()

    est, se = _mc(work, samples, threads)
    return SensitivityReport("gns", est, se, samples, seed.master, (time.perf_counter() - t0) * 1e3, parameter=delta)


# ---------------------------------------------------------------------------
# average sensitivity


def sensitive_edge_count(p: AnyPoly) -> int:
    """Number of ordered (vertex, coordinate) pairs where flipping the coordinate changes the sign."""
    s = sign_table(p)
    n = s.size.bit_length() - 1
    v = np.arange(s.size, dtype=np.int64)
    return int(sum(np.count_nonzero(s != s[v ^ (1 << i)]) for i in range(n)))


def average_sensitivity_exact(p: AnyPoly) -> Fraction:
    """``as(sgn p)`` as an exact rational."""
    if p.n > MAX_AS_EXACT:
        raise ValueError(f"exact average sensitivity needs n <= {MAX_AS_EXACT}, got {p.n}")
    return Fraction(sensitive_edge_count(p), 1 << p.n)


def average_sensitivity(p: AnyPoly, mode: str = "exact", samples: int = 100_000,
                        seed: Seed = Seed(0, 0), threads: int | None = None) -> SensitivityReport:
    """``as(f) = sum_i Pr(f(A) != f(A^(i)))``."""
    t0 = time.perf_counter()
    if mode == "exact":
        est = float(average_sensitivity_exact(p))
        return SensitivityReport("as", est, 0.0, "exact", "", (time.perf_counter() - t0) * 1e3)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    q = as_poly(p)
    n = q.n

    def work(b, size):
        rng = _parallel.block_rng(seed.master, seed.stream, b)
        A = rng.choice(np.array([-1.0, 1.0]), size=(size, n))
        base = sign(q.eval_batch(A))
        cnt = np.zeros(size)
        for i in range(n):
            A[:, i] = -A[:, i]
            cnt += sign(q.eval_batch(A)) != base
            A[:, i] = -A[:, i]
        return cnt.sum(), (cnt * cnt).sum()

    est, se = _mc(work, samples, threads)
    return SensitivityReport("as", est, se, samples, seed.master, (time.perf_counter() - t0) * 1e3)


def gaussian_average_sensitivity(p: AnyPoly, samples: int = 100_000, seed: Seed = Seed(0, 0),
                                 method: str = "direct", threads: int | None = None) -> SensitivityReport:
    """``gas(f) = sum_i Pr(f(X) != f(X^(i)))`` with ``X^(i)`` resampling coordinate ``i``.

    ``method="coupling"`` instead averages ``as(f_{X,Y})`` where
    ``f_{X,Y}(A) = f((X + A*Y)/sqrt(2))``: for ``Z = (X + A*Y)/sqrt(2)`` it counts
    coordinates whose flip of ``A_i`` changes the sign.  Both have the same mean.
    """
    t0 = time.perf_counter()
    q = as_poly(p)
    n = q.n
    if method not in ("direct", "coupling"):
        raise ValueError(f"unknown method {method!r}")
    r2 = 1.0 / math.sqrt(2.0)

    def work(b, size):
        rng = _parallel.block_rng(seed.master, seed.stream, b)
        if method == "direct":
            X = rng.standard_normal((size, n))
            fresh = rng.standard_normal((size, n))
        else:
            Xg = rng.standard_normal((size, n))
            Yg = rng.standard_normal((size, n))
            A = rng.choice(np.array([-1.0, 1.0]), size=(size, n))
            X = (Xg + A * Yg) * r2
            fresh = (Xg - A * Yg) * r2
        base = sign(q.eval_batch(X))
        cnt = np.zeros(size)
        for i in range(n):
            keep = X[:, i].copy()
            X[:, i] = fresh[:, i]
            cnt += sign(q.eval_batch(X)) != base
            X[:, i] = keep
        return cnt.sum(), (cnt * cnt).sum()

    est, se = _mc(work, samples, threads)
    return SensitivityReport("gas", est, se, samples, seed.master, (time.perf_counter() - t0) * 1e3,
                             params={"method": method})


# ---------------------------------------------------------------------------
# extremal example


def gl_extremal(n: int, d: int) -> Poly:
    """``prod_{i=1}^d (sum_j x_j - d + 2i - 1/2)``."""
    if d < 1 or n < 1:
        raise ValueError("need n >= 1 and d >= 1")
    s = Poly(n, {(j,): 1.0 for j in range(n)})
    out = Poly.const(1.0, n)
    for i in range(1, d + 1):
        out = out * (s + (-d + 2 * i - 0.5))
    return out


def gl_formula(n: int, d: int) -> Fraction:
    """``2**(1-n) * sum_{k<d} C(n, floor((n-k)/2)) * (n - floor((n-k)/2))``."""
    total = sum(math.comb(n, (n - k) // 2) * (n - (n - k) // 2) for k in range(d))
    return Fraction(total, 1 << (n - 1))


def edge_level_bound(n: int, d: int) -> Fraction:
    """``2**(1-n)`` times the sum of the ``d`` largest edge-layer sizes ``C(n, w) * (n - w)``.

    A sign pattern depending only on the Hamming weight can change sign on at
    most ``d`` layers of edges, so this is what a symmetric degree-``d`` PTF
    can reach.
    """
    sizes = sorted((math.comb(n, w) * (n - w) for w in range(n)), reverse=True)
    return Fraction(sum(sizes[:d]), 1 << (n - 1))


def gl_extremal_sign_table(n: int, d: int) -> np.ndarray:
    """Signs of :func:`gl_extremal` at every vertex, from the coordinate sum alone."""
    S = n - 2 * popcounts(n)
    vals = np.ones(1 << n)
    for i in range(1, d + 1):
        vals = vals * (S - d + 2 * i - 0.5)
    return sign(vals)


__all__ = [
    "sign_table", "ns_flip_counts", "noise_sensitivity", "noise_sensitivity_fourier",
    "gaussian_noise_sensitivity", "sensitive_edge_count", "average_sensitivity_exact",
    "average_sensitivity", "gaussian_average_sensitivity", "gl_extremal", "gl_formula",
    "edge_level_bound", "gl_extremal_sign_table",
]
