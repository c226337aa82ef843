"""k-wise independent sample spaces with enumerable seed spaces.

A family draws a random polynomial of degree ``k - 1`` over a finite field
and evaluates it at one field point per coordinate.  Values at any ``k``
distinct points are then jointly uniform.

* ``sign`` families work over GF(2**m) and output bit 0 of the value as +-1.
  Evaluation points are ordered so that as many leading coordinates as
  possible are *fully* independent (see :func:`independent_point_order`).
* ``uniform01`` and ``gaussian`` families work over a prime field.  Extra
  independent layers supply base-``p`` refinement digits; the Gaussian kind
  applies the inverse normal CDF to the refined uniform.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from scipy.special import ndtri

MAX_ENUMERATION = 1 << 24
KINDS = ("sign", "uniform01", "gaussian")
DEFAULT_GAUSSIAN_PRIME = 2_147_483_647
DEFAULT_REFINE_BITS = 48
CDF_CLAMP = 1e-12

# primitive polynomials, so that x generates the multiplicative group
PRIMITIVE_POLYS = {
    1: 0b11, 2: 0b111, 3: 0b1011, 4: 0b10011, 5: 0b100101, 6: 0b1000011,
    7: 0b10001001, 8: 0b100011101, 9: 0x211, 10: 0x409, 11: 0x805, 12: 0x1053,
    13: 0x201B, 14: 0x4443, 15: 0x8003, 16: 0x1100B,
}


# ---------------------------------------------------------------------------
# seeds


class Seed(NamedTuple):
    master: int
    stream: int = 0

    def child(self, index: int) -> "Seed":
        """Deterministic derived seed for sub-stream ``index``."""
        ss = np.random.SeedSequence([self.master, self.stream, index])
        return Seed(self.master, int(ss.generate_state(2, np.uint64)[0]))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.master, self.stream])))


_SEED_RE = re.compile(r"^(0[xX][0-9a-fA-F]+|\d+)$")


def parse_seed(text: str | int) -> int:
    """Parse a decimal or ``0x`` hex 64-bit unsigned integer."""
    if isinstance(text, int):
        value = text
    else:
        text = str(text).strip()
        if not _SEED_RE.match(text):
            raise ValueError(f"invalid seed {text!r}: expected decimal or 0x-hex")
        value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise ValueError(f"seed {value} does not fit in 64 bits")
    return value


# ---------------------------------------------------------------------------
# finite fields


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    r = math.isqrt(n)
    f = 3
    while f <= r:
        if n % f == 0:
            return False
        f += 2
    return True


def next_prime(n: int) -> int:
    """Smallest prime ``>= max(n, 2)``."""
    n = max(n, 2)
    while not is_prime(n):
        n += 1
    return n


class GF2m:
    """Arithmetic in GF(2**m) with log/exp tables (``m <= 16``)."""

    def __init__(self, m: int):
        if m not in PRIMITIVE_POLYS:
            raise ValueError(f"GF(2^m) supported for 1 <= m <= 16, got m={m}")
        self.m = m
        self.q = 1 << m
        self.poly = PRIMITIVE_POLYS[m]
        order = self.q - 1
        exp = np.zeros(2 * order + 1, dtype=np.int64)
        log = np.full(self.q, -1, dtype=np.int64)
        x = 1
        for e in range(order):
            exp[e] = x
            log[x] = e
            x <<= 1
            if x & self.q:
                x ^= self.poly
        exp[order:2 * order] = exp[:order]
        if m > 1 and len(set(exp[:order].tolist())) != order:
            raise AssertionError(f"polynomial {self.poly:#x} is not primitive")
        self.exp = exp
        self.log = log

    def mul(self, a, b):
        """Elementwise product of integer arrays (or scalars)."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        nz = (a != 0) & (b != 0)
        out = self.exp[np.where(nz, self.log[a] + self.log[b], 0)]
        return np.where(nz, out, 0)

    def pow(self, a: int, e: int) -> int:
        if e == 0:
            return 1
        if a == 0:
            return 0
        return int(self.exp[(int(self.log[a]) * e) % (self.q - 1)])

    def poly_eval(self, coeffs: np.ndarray, x) -> np.ndarray:
        """Evaluate polynomials with coefficients on the last axis (ascending) at ``x``."""
        coeffs = np.asarray(coeffs, dtype=np.int64)
        acc = np.zeros(np.broadcast_shapes(coeffs.shape[:-1], np.shape(x)), dtype=np.int64)
        for j in range(coeffs.shape[-1] - 1, -1, -1):
            acc = self.mul(acc, x) ^ coeffs[..., j]
        return acc

    def bit0_mask(self, y: int) -> int:
        """Mask ``M`` with ``bit0(c * y) = parity(c & M)`` for every ``c``."""
        mask = 0
        for t in range(self.m):
            if int(self.mul(1 << t, y)) & 1:
                mask |= 1 << t
        return mask


def independent_point_order(field: GF2m, k: int, count: int) -> list[int]:
    """Field points for ``count`` coordinates of a sign family.

    Bit 0 of a random degree-``(k-1)`` polynomial at a set of points has a
    nonzero-mean parity iff the vectors ``(1, x, x**3, x**5, ...)`` (odd
    powers below ``k``) sum to zero over GF(2).  Points are scanned in
    ascending order and kept greedily while these vectors stay linearly
    independent; the remaining points follow in ascending order.  Coordinates
    mapped to the independent prefix are fully independent.
    """
    if count > field.q:
        raise ValueError(f"{count} coordinates exceed field size {field.q}")
    basis: dict[int, int] = {}
    chosen, rest = [], []
    odd = list(range(1, k, 2))
    for x in range(field.q):
        v = 1
        shift = 1
        for e in odd:
            v |= field.pow(x, e) << shift
            shift += field.m
        w = v
        while w:
            top = w.bit_length() - 1
            if top not in basis:
                basis[top] = w
                chosen.append(x)
                break
            w ^= basis[top]
        else:
            rest.append(x)
        if len(chosen) >= count:
            break
    if len(chosen) < count:
        rest.extend(range(x + 1, field.q))
    return (chosen + rest)[:count]


def _poly_eval_mod(C: np.ndarray, pts: np.ndarray, p: int) -> np.ndarray:
    """``sum_j C[..., j] * pts**j mod p`` for every point; returns shape ``C.shape[:-1] + (len(pts),)``."""
    C = np.asarray(C, dtype=np.int64)
    pts = np.asarray(pts, dtype=np.int64)
    k = C.shape[-1]
    V = np.ones((k, pts.size), dtype=np.int64)
    for j in range(1, k):
        V[j] = V[j - 1] * pts % p
    if k <= 64 and p < 1 << 31:
        # split V into 16-bit halves so float64 products and sums stay exact
        flat = C.reshape(-1, k).astype(np.float64)
        lo = (flat @ (V & 0xFFFF).astype(np.float64)).astype(np.int64)
        hi = (flat @ (V >> 16).astype(np.float64)).astype(np.int64) % p
        out = (lo + (hi << 16)) % p
        return out.reshape(C.shape[:-1] + (pts.size,))
    acc = np.zeros(C.shape[:-1] + (pts.size,), dtype=object if p >= 1 << 31 else np.int64)
    for j in range(k - 1, -1, -1):
        acc = (acc * pts + C[..., j:j + 1]) % p
    return acc.astype(np.int64)


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class KWiseFamily:
    """k-wise independent family on coordinates ``0..n-1``.

    ``prime`` is the field size for ``uniform01``/``gaussian`` kinds
    (default: smallest prime >= n, or 2**31 - 1 for ``gaussian``).
    ``field_bits`` is ``m`` for the sign kind (default ``ceil(log2 n) + 1``).
    ``refine_bits`` sets how many extra bits of resolution the prime-field
    kinds add (default 48 for ``gaussian``, 0 for ``uniform01``).
    """

    n: int
    k: int
    kind: str = "sign"
    prime: int | None = None
    field_bits: int | None = None
    refine_bits: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be positive")
        if self.kind == "sign":
            m = self.field_bits if self.field_bits is not None else math.ceil(math.log2(self.n)) + 1
            if (1 << m) < self.n:
                raise ValueError(f"GF(2^{m}) has fewer than n={self.n} points")
            object.__setattr__(self, "field_bits", m)
            object.__setattr__(self, "prime", None)
            object.__setattr__(self, "refine_bits", 0)
        else:
            p = self.prime
            if p is None:
                p = DEFAULT_GAUSSIAN_PRIME if self.kind == "gaussian" else next_prime(self.n)
            if not is_prime(p):
                raise ValueError(f"{p} is not prime")
            if p < self.n:
                raise ValueError(f"prime {p} is smaller than n={self.n}")
            if p >= 1 << 31:
                raise ValueError("prime must be below 2**31")
            r = self.refine_bits
            if r is None:
                r = DEFAULT_REFINE_BITS if self.kind == "gaussian" else 0
            if r < 0:
                raise ValueError("refine_bits must be non-negative")
            object.__setattr__(self, "prime", p)
            object.__setattr__(self, "refine_bits", r)

    # sizes ---------------------------------------------------------------
    @property
    def field_size(self) -> int:
        return 1 << self.field_bits if self.kind == "sign" else self.prime

    @property
    def layers(self) -> int:
        if self.kind == "sign" or self.refine_bits == 0:
            return 1
        return 1 + math.ceil(self.refine_bits / math.floor(math.log2(self.prime)))

    @property
    def seed_count(self) -> int:
        return self.field_size ** (self.k * self.layers)

    @property
    def seed_bits(self) -> int:
        return self.k * self.layers * math.ceil(math.log2(self.field_size))

    @cached_property
    def gf(self) -> GF2m | None:
        return GF2m(self.field_bits) if self.kind == "sign" else None

    @cached_property
    def points(self) -> np.ndarray:
        """Field point assigned to each coordinate."""
        if self.kind == "sign":
            return np.array(independent_point_order(self.gf, self.k, self.n), dtype=np.int64)
        return np.arange(self.n, dtype=np.int64)

    @cached_property
    def independent_prefix(self) -> int:
        """Number of leading coordinates that are fully independent (sign kind)."""
        if self.kind != "sign":
            return min(self.k, self.n)
        return self._rank_prefix(self.points)

    def _rank_prefix(self, pts) -> int:
        basis: dict[int, int] = {}
        odd = list(range(1, self.k, 2))
        count = 0
        for x in pts:
            v, shift = 1, 1
            for e in odd:
                v |= self.gf.pow(int(x), e) << shift
                shift += self.field_bits
            w = v
            while w:
                top = w.bit_length() - 1
                if top not in basis:
                    basis[top] = w
                    break
                w ^= basis[top]
            if not w:
                return count
            count += 1
        return count

    @cached_property
    def _bit_masks(self) -> np.ndarray:
        """``masks[i, j]`` such that output bit of coordinate i is parity of sum_j popcount(c_j & masks[i, j])."""
        masks = np.zeros((self.n, self.k), dtype=np.int64)
        for i, x in enumerate(self.points.tolist()):
            for j in range(self.k):
                masks[i, j] = self.gf.bit0_mask(self.gf.pow(x, j))
        return masks

    # seeds -> coefficients ----------------------------------------------
    def coefficients(self, seed: Seed) -> np.ndarray:
        """Coefficient array of shape ``(layers, k)`` determined by ``seed``."""
        return seed.generator().integers(0, self.field_size, size=(self.layers, self.k), dtype=np.int64)

    def random_coefficients(self, rng: np.random.Generator, size: int | tuple) -> np.ndarray:
        size = (size,) if isinstance(size, int) else tuple(size)
        return rng.integers(0, self.field_size, size=size + (self.layers, self.k), dtype=np.int64)

    def enumerate_coefficients(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Coefficients for seed indices ``start..stop-1`` (base-q digits)."""
        stop = self.seed_count if stop is None else stop
        idx = np.arange(start, stop, dtype=np.int64)
        width = self.layers * self.k
        digits = np.empty((idx.size, width), dtype=np.int64)
        q = self.field_size
        for w in range(width):
            digits[:, w] = idx % q
            idx = idx // q
        return digits.reshape(-1, self.layers, self.k)

    def iter_all_coefficients(self, chunk: int = 1 << 18) -> Iterator[np.ndarray]:
        if self.seed_count > MAX_ENUMERATION:
            raise ValueError(f"seed space {self.seed_count} exceeds enumeration cap {MAX_ENUMERATION}")
        for start in range(0, self.seed_count, chunk):
            yield self.enumerate_coefficients(start, min(start + chunk, self.seed_count))

    # evaluation -----------------------------------------------------------
    def _check_indices(self, indices) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        limit = self.n if self.kind == "sign" else self.prime
        if idx.size and (idx.min() < 0 or idx.max() >= limit):
            raise IndexError(f"coordinate index out of range [0, {limit})")
        return idx

    def field_values(self, coeffs: np.ndarray, indices) -> np.ndarray:
        """Raw field values, shape ``coeffs.shape[:-1] + (len(indices),)`` (per layer)."""
        idx = self._check_indices(indices)
        if self.kind == "sign":
            pts = self.points[idx]
            return self.gf.poly_eval(np.asarray(coeffs)[..., None, :], pts)
        return _poly_eval_mod(coeffs, idx, self.prime)

    def values(self, coeffs: np.ndarray, indices=None) -> np.ndarray:
        """Mapped outputs, shape ``coeffs.shape[:-2] + (len(indices),)``."""
        idx = np.arange(self.n) if indices is None else self._check_indices(indices)
        coeffs = np.asarray(coeffs, dtype=np.int64)
        if self.kind == "sign":
            masks = self._bit_masks[idx]  # (len, k)
            c = coeffs[..., 0, :]  # (..., k)
            bits = np.bitwise_count(c[..., None, :] & masks).sum(axis=-1) & 1
            return 1.0 - 2.0 * bits
        r = _poly_eval_mod(coeffs, idx, self.prime)  # (..., L, len)
        # digits r_0 r_1 ... r_{L-1} in base p, then the cell midpoint
        u = r[..., -1, :] + 0.5
        for l in range(self.layers - 2, -1, -1):
            u = u / self.prime + r[..., l, :]
        u = u / self.prime
        if self.kind == "uniform01":
            return u
        return ndtri(np.clip(u, CDF_CLAMP, 1.0 - CDF_CLAMP))

    def marginal_support(self) -> np.ndarray:
        """All values a single coordinate can take, each with equal probability (refine_bits = 0)."""
        if self.kind == "sign":
            return np.array([-1.0, 1.0])
        if self.layers != 1:
            raise ValueError("marginal support is only tabulated without refinement")
        u = (np.arange(self.prime) + 0.5) / self.prime
        return u if self.kind == "uniform01" else ndtri(np.clip(u, CDF_CLAMP, 1.0 - CDF_CLAMP))


def sample(f: KWiseFamily, seed: Seed, i: int) -> float:
    """Output of coordinate ``i`` under ``seed``."""
    return float(f.values(f.coefficients(seed), [i])[0])


def reference_moment(kind: str, e: int) -> float:
    """Moment ``E[Y**e]`` of the ideal marginal for each family kind."""
    if kind == "sign":
        return 1.0 if e % 2 == 0 else 0.0
    if kind == "uniform01":
        return 1.0 / (e + 1)
    return 0.0 if e % 2 else float(math.prod(range(e - 1, 0, -2)))


def exponent_vectors(m: int, cap: int) -> list[tuple[int, ...]]:
    """All non-zero exponent vectors of length ``m`` with total degree ``<= cap``."""
    def rec(m: int, budget: int):
        if m == 0:
            yield ()
            return
        for x in range(budget + 1):
            for rest in rec(m - 1, budget - x):
                yield (x,) + rest

    return [e for e in rec(m, cap) if any(e)]


def verify_kwise(f: KWiseFamily, points: Sequence[int], degree_cap: int) -> float:
    """Max deviation of every mixed moment over ``points`` from the independent reference.

    Enumerates the whole seed space.
    """
    points = list(points)
    if len(set(points)) != len(points):
        raise ValueError("points must be distinct")
    if f.seed_count > MAX_ENUMERATION:
        raise ValueError(f"seed space {f.seed_count} exceeds enumeration cap {MAX_ENUMERATION}")
    exps = exponent_vectors(len(points), degree_cap)
    if not exps:
        return 0.0
    # +-1 outputs only see exponent parities
    keys = [tuple(x % 2 for x in e) if f.kind == "sign" else e for e in exps]
    distinct = list(dict.fromkeys(keys))
    totals = np.zeros(len(distinct))
    for coeffs in f.iter_all_coefficients():
        vals = f.values(coeffs, points)  # (S, m)
        for t, e in enumerate(distinct):
            totals[t] += np.prod(vals ** np.array(e), axis=1).sum()
    lookup = dict(zip(distinct, totals / f.seed_count))
    moments = np.array([lookup[key] for key in keys])
    ref = np.array([math.prod(reference_moment(f.kind, x) for x in e) for e in exps])
    return float(np.max(np.abs(moments - ref)))


def verify_field_uniformity(f: KWiseFamily, points: Sequence[int]) -> bool:
    """Whether layer-0 field values at ``points`` are exactly uniform over the field^|points|."""
    if f.seed_count > MAX_ENUMERATION:
        raise ValueError(f"seed space {f.seed_count} exceeds enumeration cap {MAX_ENUMERATION}")
    q = f.field_size
    counts = np.zeros(q ** len(points), dtype=np.int64)
    for coeffs in f.iter_all_coefficients():
        v = f.field_values(coeffs, points)[:, 0, :]
        code = np.zeros(v.shape[0], dtype=np.int64)
        for j in range(v.shape[1]):
            code = code * q + v[:, j]
        counts += np.bincount(code, minlength=counts.size)
    return bool(np.all(counts == counts[0]))


# ---------------------------------------------------------------------------
# bucket hashing


def hash_family(n: int, prime: int | None = None) -> KWiseFamily:
    """2-independent prime-field family used for bucket hashing."""
    return KWiseFamily(n, 2, "uniform01", prime=prime, refine_bits=0)


def bucket_values(h: KWiseFamily, coeffs: np.ndarray, indices, a: int) -> np.ndarray:
    if a < 1:
        raise ValueError("bucket count must be positive")
    return h.field_values(coeffs, indices)[..., 0, :] % a


def bucket_hash(h: KWiseFamily, seed: Seed, i: int, a: int) -> int:
    """Bucket in ``[0, a)`` of coordinate ``i``: the pairwise-independent residue mod ``a``."""
    if h.k != 2:
        raise ValueError("bucket hashing expects a k = 2 family")
    return int(bucket_values(h, h.coefficients(seed), [i], a)[0])


def collision_bound(h: KWiseFamily, a: int) -> float:
    """Reported bound ``1/a + 1/p`` on pairwise collision probability."""
    return 1.0 / a + 1.0 / h.field_size


def collision_probability(h: KWiseFamily, i: int, j: int, a: int) -> float:
    """Exact ``Pr[h(i) = h(j)]`` over all seeds."""
    hits = 0
    for coeffs in h.iter_all_coefficients():
        b = bucket_values(h, coeffs, [i, j], a)
        hits += int(np.count_nonzero(b[:, 0] == b[:, 1]))
    return hits / h.seed_count


def bucket_marginal(h: KWiseFamily, i: int, a: int) -> np.ndarray:
    """Exact distribution of ``h(i)`` over ``[0, a)``."""
    counts = np.zeros(a, dtype=np.int64)
    for coeffs in h.iter_all_coefficients():
        counts += np.bincount(bucket_values(h, coeffs, [i], a)[:, 0], minlength=a)
    return counts / h.seed_count


__all__ = [
    "Seed", "parse_seed", "GF2m", "is_prime", "next_prime", "independent_point_order",
    "KWiseFamily", "sample", "verify_kwise", "verify_field_uniformity", "reference_moment",
    "exponent_vectors", "hash_family", "bucket_values", "bucket_hash", "collision_bound",
    "collision_probability", "bucket_marginal", "MAX_ENUMERATION",
]
