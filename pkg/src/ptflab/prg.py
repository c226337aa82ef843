"""Pseudorandom generators for polynomial threshold functions.

Gaussian generator: ``X = (1/sqrt(N)) * sum_i X^i`` where each block ``X^i``
is an independent draw from a k-wise independent Gaussian family.

Bernoulli generator: a pairwise independent hash ``h: [n] -> [a]`` assigns
each coordinate to a bucket and ``A_i = A^{h(i)}_i`` where the ``a`` buckets
use independent k-wise independent sign families.

Every sampler is a pure function of its seed.  Monte Carlo estimators split
work into fixed-size blocks with their own random streams, so results are
identical for any thread count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _parallel
from .kwise import MAX_ENUMERATION, KWiseFamily, Seed, bucket_values, hash_family
from .poly import AnyPoly, MultilinearPoly, as_poly, multilinearize
from .walsh import fwht, popcounts, sign, walsh_coefficients

PRG_TAG = 1
REFERENCE_TAG = 2
SAMPLE_BLOCK = 1 << 12


class TrueGaussianFamily:
    """Test double: every block is an exact standard Gaussian vector."""

    def __init__(self, n: int):
        self.n = n
        self.seed_bits = 64
        self.seed_count = math.inf

    def coefficients(self, seed: Seed) -> np.ndarray:
        return seed.generator().standard_normal(self.n)

    def random_coefficients(self, rng: np.random.Generator, size) -> np.ndarray:
        size = (size,) if isinstance(size, int) else tuple(size)
        return rng.standard_normal(size + (self.n,))

    def values(self, coeffs: np.ndarray, indices=None) -> np.ndarray:
        return np.asarray(coeffs) if indices is None else np.asarray(coeffs)[..., indices]


@dataclass(frozen=True)
class GaussianPrgSpec:
    n: int
    d: int
    N: int
    k: int
    family: KWiseFamily | TrueGaussianFamily | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("block count N must be at least 1")
        if self.k < 2:
            raise ValueError("independence k must be at least 2")
        if self.family is None:
            object.__setattr__(self, "family", KWiseFamily(self.n, self.k, "gaussian"))
        elif getattr(self.family, "n", self.n) < self.n:
            raise ValueError("family covers fewer than n coordinates")

    @property
    def seed_bits(self) -> int:
        return self.N * self.family.seed_bits


@dataclass(frozen=True)
class BernoulliPrgSpec:
    n: int
    d: int
    a: int
    k_inner: int
    hash: KWiseFamily | None = None
    inner: KWiseFamily | None = None

    def __post_init__(self):
        if self.a < 1:
            raise ValueError("bucket count a must be at least 1")
        if self.k_inner < 4 * self.d:
            raise ValueError(f"k_inner={self.k_inner} must be at least 4d={4 * self.d}")
        if self.hash is None:
            object.__setattr__(self, "hash", hash_family(self.n))
        if self.hash.k != 2:
            raise ValueError("bucket hash must be a k = 2 family")
        if self.inner is None:
            object.__setattr__(self, "inner", KWiseFamily(self.n, self.k_inner, "sign"))
        if self.inner.kind != "sign" or self.inner.k != self.k_inner or self.inner.n < self.n:
            raise ValueError("inner family must be a sign family with k = k_inner covering n coordinates")

    @property
    def inner_families(self) -> list[KWiseFamily]:
        """One handle per bucket; buckets draw independent seeds from the same family."""
        return [self.inner] * self.a

    @property
    def seed_bits(self) -> int:
        return self.hash.seed_bits + self.a * self.inner.seed_bits

    @property
    def seed_count(self) -> int:
        return self.hash.seed_count * self.inner.seed_count ** self.a


# ---------------------------------------------------------------------------
# samplers


def gaussian_prg_sample(spec: GaussianPrgSpec, seed: Seed) -> np.ndarray:
    """One generator output; block ``i`` uses the derived seed ``seed.child(i)``."""
    total = np.zeros(spec.n)
    for i in range(spec.N):
        coeffs = spec.family.coefficients(seed.child(i))
        total += spec.family.values(coeffs)[: spec.n]
    return total / math.sqrt(spec.N)


def gaussian_prg_batch(spec: GaussianPrgSpec, rng: np.random.Generator, size: int,
                       block_chunk: int = 100) -> np.ndarray:
    """``size`` outputs for independent uniformly random seeds, shape ``(size, n)``."""
    total = np.zeros((size, spec.n))
    for start in range(0, spec.N, block_chunk):
        nb = min(block_chunk, spec.N - start)
        coeffs = spec.family.random_coefficients(rng, (size, nb))
        total += spec.family.values(coeffs)[..., : spec.n].sum(axis=1)
    return total / math.sqrt(spec.N)


def _bernoulli_outputs(spec: BernoulliPrgSpec, h_coeffs: np.ndarray, inner_coeffs: np.ndarray) -> np.ndarray:
    """Outputs from hash coefficients ``(S, 1, 2)`` and inner coefficients ``(S, a, 1, k)``."""
    buckets = bucket_values(spec.hash, h_coeffs, np.arange(spec.n), spec.a)  # (S, n)
    vals = spec.inner.values(inner_coeffs, np.arange(spec.n))  # (S, a, n)
    return np.take_along_axis(vals, buckets[:, None, :], axis=1)[:, 0, :]


def bernoulli_prg_sample(spec: BernoulliPrgSpec, seed: Seed) -> np.ndarray:
    """One output in {-1, 1}^n; the hash uses ``seed.child(0)`` and bucket ``j`` uses ``seed.child(j + 1)``."""
    h = spec.hash.coefficients(seed.child(0))[None]
    inner = np.stack([spec.inner.coefficients(seed.child(j + 1)) for j in range(spec.a)])[None]
    return _bernoulli_outputs(spec, h, inner)[0]


def bernoulli_prg_batch(spec: BernoulliPrgSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    h = spec.hash.random_coefficients(rng, size)
    inner = spec.inner.random_coefficients(rng, (size, spec.a))
    return _bernoulli_outputs(spec, h, inner)


def prg_batch(spec, rng: np.random.Generator, size: int) -> np.ndarray:
    if isinstance(spec, GaussianPrgSpec):
        return gaussian_prg_batch(spec, rng, size)
    return bernoulli_prg_batch(spec, rng, size)


# ---------------------------------------------------------------------------
# exact enumeration


def _check_cap(count: float, what: str):
    if count > MAX_ENUMERATION:
        raise ValueError(f"{what} has {count} seeds, above the enumeration cap {MAX_ENUMERATION}")


def _inner_character_table(family: KWiseFamily, n: int) -> np.ndarray:
    """``T[S] = E_seed[prod_{i in S} A_i]`` for every subset mask ``S`` of ``[n]``."""
    _check_cap(family.seed_count, "inner family")
    if n > 24:
        raise ValueError("character tables need n <= 24")
    hist = np.zeros(1 << n)
    weights = 1 << np.arange(n, dtype=np.int64)
    for coeffs in family.iter_all_coefficients():
        bits = (family.values(coeffs, np.arange(n)) < 0).astype(np.int64)
        hist += np.bincount(bits @ weights, minlength=1 << n)
    return fwht(hist) / family.seed_count


def bernoulli_prg_moments(spec: BernoulliPrgSpec) -> np.ndarray:
    """Exact ``E[prod_{i in S} A_i]`` over the full seed space, for every mask ``S``.

    Buckets draw independent seeds, so for a fixed hash seed the expectation
    factors into per-bucket table lookups; averaging over every hash seed
    gives the exact value.  Each factor's seed space must be enumerable.
    """
    _check_cap(spec.hash.seed_count, "hash family")
    n = spec.n
    T = _inner_character_table(spec.inner, n)
    masks = np.arange(1 << n, dtype=np.int64)
    total = np.zeros(1 << n)
    weights = 1 << np.arange(n, dtype=np.int64)
    for coeffs in spec.hash.iter_all_coefficients():
        buckets = bucket_values(spec.hash, coeffs, np.arange(n), spec.a)  # (S, n)
        for row in buckets:
            prod = np.ones(1 << n)
            for b in range(spec.a):
                mb = int(((row == b) * weights).sum())
                if mb:
                    prod *= T[masks & mb]
            total += prod
    return total / spec.hash.seed_count


def bernoulli_prg_moments_bruteforce(spec: BernoulliPrgSpec) -> np.ndarray:
    """Same as :func:`bernoulli_prg_moments` by listing every joint seed (tiny specs only)."""
    _check_cap(spec.seed_count, "generator")
    n = spec.n
    hs = spec.hash.enumerate_coefficients()
    inner = spec.inner.enumerate_coefficients()
    weights = 1 << np.arange(n, dtype=np.int64)
    hist = np.zeros(1 << n)
    Q = inner.shape[0]
    for h in hs:
        for combo in np.ndindex(*([Q] * spec.a)):
            out = _bernoulli_outputs(spec, h[None], inner[list(combo)][None])[0]
            hist[int(((out < 0) * weights).sum())] += 1
    return fwht(hist) / spec.seed_count


def max_monomial_deviation(moments: np.ndarray, degree_cap: int) -> float:
    """Largest ``|E[chi_S]|`` over non-empty ``S`` with ``|S| <= degree_cap``."""
    n = moments.size.bit_length() - 1
    sizes = popcounts(n)
    sel = (sizes > 0) & (sizes <= degree_cap)
    return float(np.max(np.abs(moments[sel]), initial=0.0))


def _gaussian_block_table(spec: GaussianPrgSpec) -> np.ndarray:
    fam = spec.family
    if not isinstance(fam, KWiseFamily):
        raise ValueError("enumeration needs a finite family")
    return np.concatenate([fam.values(c)[..., : spec.n] for c in fam.iter_all_coefficients()])


def gaussian_prg_enumerate(spec: GaussianPrgSpec, chunk: int = 1 << 16):
    """Yield every generator output (one per joint seed), in chunks of rows."""
    fam = spec.family
    if not isinstance(fam, KWiseFamily):
        raise ValueError("enumeration needs a finite family")
    _check_cap(fam.seed_count ** spec.N, "generator")
    table = _gaussian_block_table(spec)
    Q = table.shape[0]
    total = Q ** spec.N
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        X = np.zeros((idx.size, spec.n))
        for _ in range(spec.N):
            X += table[idx % Q]
            idx = idx // Q
        yield X / math.sqrt(spec.N)


def gaussian_prg_moments(spec: GaussianPrgSpec, exponents: Sequence[Sequence[int]]) -> np.ndarray:
    """Exact ``E[prod_j X_j**e_j]`` under the generator, by full enumeration."""
    E = np.asarray(exponents, dtype=np.int64)
    totals = np.zeros(len(E))
    count = 0
    for X in gaussian_prg_enumerate(spec):
        for t, e in enumerate(E):
            totals[t] += np.prod(X ** e, axis=1).sum()
        count += X.shape[0]
    return totals / count


def independent_marginal_moments(spec: GaussianPrgSpec, exponents: Sequence[Sequence[int]]) -> np.ndarray:
    """``E[prod_j X_j**e_j]`` when every block coordinate is an independent copy of the family marginal."""
    support = spec.family.marginal_support()
    top = int(np.max(exponents, initial=0))
    base = np.array([np.mean(support ** e) for e in range(top + 1)])
    # moments of a sum of N iid copies via binomial convolution
    summed = np.zeros(top + 1)
    summed[0] = 1.0
    for _ in range(spec.N):
        nxt = np.zeros(top + 1)
        for e in range(top + 1):
            nxt[e] = sum(math.comb(e, r) * summed[r] * base[e - r] for r in range(e + 1))
        summed = nxt
    scaled = summed / np.sqrt(spec.N) ** np.arange(top + 1)
    return np.array([math.prod(scaled[x] for x in e) for e in exponents])


# ---------------------------------------------------------------------------
# fooling gaps


class FoolingResult(NamedTuple):
    gap: float
    stderr: float
    prg_mean: float
    reference_mean: float
    samples: int


def _sign_mean(vals: np.ndarray) -> np.ndarray:
    return np.where(vals >= 0, 1.0, -1.0)


def gaussian_reference(polys: Sequence[AnyPoly], samples: int, master: int, stream: int = 0,
                       threads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Antithetic MC estimate of ``E[sgn p(Y)]`` for ``Y ~ N(0, I)``; ``samples`` counts pairs."""
    polys = [as_poly(p) for p in polys]
    n = max(p.n for p in polys)
    sizes = _parallel.block_sizes(samples, SAMPLE_BLOCK)

    def work(b):
        Y = _parallel.block_rng(master, stream, REFERENCE_TAG, b).standard_normal((sizes[b], n))
        out = np.empty((len(polys), 2))
        for j, p in enumerate(polys):
            Yp = Y[:, : p.n]
            pair = 0.5 * (_sign_mean(p.eval_batch(Yp)) + _sign_mean(p.eval_batch(-Yp)))
            out[j] = pair.sum(), (pair * pair).sum()
        return out

    acc = _parallel.ordered_sum(_parallel.run_blocks(work, len(sizes), threads))
    mean = acc[:, 0] / samples
    var = np.maximum(acc[:, 1] / samples - mean ** 2, 0.0) * samples / max(samples - 1, 1)
    return mean, np.sqrt(var / samples)


def cube_expectation(p: AnyPoly) -> float:
    """Exact ``E[sgn p(A)]`` over the uniform hypercube (n <= 24)."""
    return float(np.mean(_sign_mean(multilinearize(p).truth_table())))


def prg_expectations(spec, polys: Sequence[AnyPoly], samples: int, master: int, stream: int = 0,
                     threads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """MC estimate of ``E[sgn p(PRG)]`` over ``samples`` random seeds for each polynomial."""
    polys = [as_poly(p) for p in polys]
    sizes = _parallel.block_sizes(samples, SAMPLE_BLOCK)

    def work(b):
        X = prg_batch(spec, _parallel.block_rng(master, stream, PRG_TAG, b), sizes[b])
        out = np.empty((len(polys), 2))
        for j, p in enumerate(polys):
            s = _sign_mean(p.eval_batch(X[:, : p.n]))
            out[j] = s.sum(), (s * s).sum()
        return out

    acc = _parallel.ordered_sum(_parallel.run_blocks(work, len(sizes), threads))
    mean = acc[:, 0] / samples
    var = np.maximum(acc[:, 1] / samples - mean ** 2, 0.0) * samples / max(samples - 1, 1)
    return mean, np.sqrt(var / samples)


def prg_expectations_exact(spec, polys: Sequence[AnyPoly]) -> np.ndarray:
    """Exact ``E[sgn p(PRG)]`` by enumerating the seed space."""
    polys = [as_poly(p) for p in polys]
    if isinstance(spec, BernoulliPrgSpec):
        moments = bernoulli_prg_moments(spec)
        out = []
        for p in polys:
            ml = multilinearize(p.with_n(spec.n))
            fhat = walsh_coefficients(_sign_mean(ml.truth_table()))
            out.append(float(fhat @ moments))
        return np.array(out)
    totals = np.zeros(len(polys))
    count = 0
    for X in gaussian_prg_enumerate(spec):
        for j, p in enumerate(polys):
            totals[j] += _sign_mean(p.eval_batch(X[:, : p.n])).sum()
        count += X.shape[0]
    return totals / count


def fooling_gaps(spec, polys: Sequence[AnyPoly], mode: str = "monte_carlo", samples: int = 100_000,
                 seed: Seed = Seed(0, 0), reference_samples: int | None = None,
                 threads: int | None = None) -> list[FoolingResult]:
    """``|E_prg[sgn p] - E_ref[sgn p]|`` for several polynomials sharing one set of draws.

    The reference is the exact hypercube average for the Bernoulli generator
    and an antithetic Gaussian MC estimate for the Gaussian generator.
    """
    polys = [as_poly(p) for p in polys]
    for p in polys:
        if p.n > spec.n:
            raise ValueError(f"polynomial has n={p.n} but the generator has n={spec.n}")
    if mode == "enumerate":
        prg_mean = prg_expectations_exact(spec, polys)
        prg_se = np.zeros(len(polys))
        used = 0
    elif mode == "monte_carlo":
        prg_mean, prg_se = prg_expectations(spec, polys, samples, seed.master, seed.stream, threads)
        used = samples
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if isinstance(spec, BernoulliPrgSpec):
        if spec.n > 24:
            raise ValueError("the hypercube reference needs n <= 24")
        ref_mean = np.array([cube_expectation(p.with_n(spec.n)) for p in polys])
        ref_se = np.zeros(len(polys))
    else:
        ref_n = reference_samples if reference_samples is not None else max(samples, 1)
        ref_mean, ref_se = gaussian_reference(polys, ref_n, seed.master, seed.stream, threads)
    out = []
    for j in range(len(polys)):
        gap = abs(float(prg_mean[j]) - float(ref_mean[j]))
        se = math.sqrt(float(prg_se[j]) ** 2 + float(ref_se[j]) ** 2)
        out.append(FoolingResult(gap, se, float(prg_mean[j]), float(ref_mean[j]), used))
    return out


def fooling_gap(spec, p: AnyPoly, mode: str = "monte_carlo", samples: int = 100_000,
                seed: Seed = Seed(0, 0), reference_samples: int | None = None,
                threads: int | None = None) -> FoolingResult:
    return fooling_gaps(spec, [p], mode, samples, seed, reference_samples, threads)[0]


def suggest_parameters(eps: float, d: int, c: float = 0.5) -> dict:
    """Parameter shapes suggested by the asymptotic analysis, with all hidden constants set to 1.

    These are starting points for sweeps; samplers never use them implicitly.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")
    if c <= 0:
        raise ValueError("c must be positive")
    return {
        "gaussian": {"N": math.ceil(eps ** (-2 - c)), "k": max(2, math.ceil(d / c))},
        "bernoulli": {"a": math.ceil(eps ** -6), "k_inner": math.ceil(eps ** -5) + 4 * d},
    }


__all__ = [
    "TrueGaussianFamily", "GaussianPrgSpec", "BernoulliPrgSpec", "gaussian_prg_sample",
    "gaussian_prg_batch", "bernoulli_prg_sample", "bernoulli_prg_batch", "bernoulli_prg_moments",
    "bernoulli_prg_moments_bruteforce", "max_monomial_deviation", "gaussian_prg_enumerate",
    "gaussian_prg_moments", "independent_marginal_moments", "FoolingResult", "gaussian_reference",
    "cube_expectation", "prg_expectations", "prg_expectations_exact", "fooling_gaps", "fooling_gap",
    "suggest_parameters",
]
