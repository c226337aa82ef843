"""Certify that a tuple of polynomials spreads its Gaussian mass (diffuseness).

A tuple ``q = (q_1, ..., q_m)`` is ``(eps, N)``-diffuse when every box
``{|q_i - a_i| <= eps}`` has probability at most ``eps**m * N`` and each
``E[q_i**2] <= 1``.  :func:`diffuse_certify` measures the smallest such ``N``
empirically.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .. import _parallel
from ..kwise import Seed
from ..poly import AnyPoly, Poly, as_poly, gaussian_l2

MAX_M = 3
SAMPLE_BLOCK = 1 << 18
QUANTILE = 0.9999
RANGE_FACTOR = 4.0


@dataclass(frozen=True)
class DiffuseCertificate:
    eps: float
    N_bound: float
    m: int
    worst_box: tuple
    method: str
    samples: int
    norms: tuple

    def __post_init__(self):
        if self.N_bound < 0:
            raise ValueError("N_bound must be nonnegative")


def _prepare(qs: Sequence[AnyPoly]) -> tuple[list[Poly], int, tuple]:
    qs = [as_poly(q) for q in qs]
    m = len(qs)
    if not 1 <= m <= MAX_M:
        raise ValueError(f"diffuse checks support 1 <= m <= {MAX_M}, got {m}")
    n = max(q.n for q in qs)
    qs = [q.with_n(n) for q in qs]
    norms = tuple(gaussian_l2(q) for q in qs)
    for i, v in enumerate(norms):
        if v > 1.0 + 1e-12:
            raise ValueError(f"q_{i} has |q|_2 = {v:.6g} > 1")
    return qs, n, norms


def _sample_values(qs: list[Poly], n: int, samples: int, seed: Seed, threads=None) -> list[np.ndarray]:
    sizes = _parallel.block_sizes(samples, SAMPLE_BLOCK)

    def work(b):
        X = _parallel.block_rng(seed.master, seed.stream, b).standard_normal((sizes[b], n))
        return np.stack([q.eval_batch(X) for q in qs], axis=1)

    return _parallel.run_blocks(work, len(sizes), threads)


def _grid_max(blocks: list[np.ndarray], eps: float, m: int, samples: int):
    """Largest count of a side-``2 eps`` box whose corners lie on the ``eps/2`` lattice.

    Coordinates are binned at width ``eps/2``; a box covers 4 consecutive bins
    per axis.  Axis 0 is swept one bin at a time while the other axes are held
    as a dense histogram, which keeps memory at ``O(bins**(m-1))``.
    """
    step = eps / 2.0
    mx = max(float(np.max(np.abs(b))) for b in blocks) if blocks else 0.0
    q = max(float(np.quantile(np.max(np.abs(blocks[0]), axis=1), QUANTILE)), step)
    R = min(RANGE_FACTOR * q, mx + 2 * eps)
    lo = math.floor(-R / step)
    nb = math.ceil(R / step) - lo + 1
    idx_parts = []
    for b in blocks:
        k = np.floor(b / step).astype(np.int64) - lo
        keep = np.all((k >= 0) & (k < nb), axis=1)
        idx_parts.append(k[keep].astype(np.int32))
    idx = np.concatenate(idx_parts) if idx_parts else np.zeros((0, m), np.int32)
    order = np.argsort(idx[:, 0], kind="stable")
    idx = idx[order]
    starts = np.searchsorted(idx[:, 0], np.arange(nb + 1))
    rest_shape = (nb,) * (m - 1)
    rest_size = nb ** (m - 1)
    if m > 1:
        lin = np.ravel_multi_index(tuple(idx[:, j] for j in range(1, m)), rest_shape)
    else:
        lin = np.zeros(idx.shape[0], dtype=np.int64)

    def box_sums(h: np.ndarray) -> np.ndarray:
        h = h.reshape(rest_shape) if m > 1 else h
        for ax in range(m - 1):
            c = np.cumsum(h, axis=ax)
            pad = np.zeros_like(np.take(c, [0], axis=ax))
            c = np.concatenate([pad, c], axis=ax)
            n_ax = c.shape[ax]
            h = np.take(c, range(4, n_ax), axis=ax) - np.take(c, range(0, n_ax - 4), axis=ax)
        return h

    window: list[np.ndarray] = []
    best, best_at = -1, None
    for i in range(nb):
        h = np.bincount(lin[starts[i]:starts[i + 1]], minlength=rest_size).astype(np.int64)
        window.append(h)
        if len(window) > 4:
            window.pop(0)
        if len(window) == 4:
            s = box_sums(window[0] + window[1] + window[2] + window[3])
            j = int(np.argmax(s))
            if s.flat[j] > best:
                best = int(s.flat[j])
                pos = np.unravel_index(j, s.shape) if m > 1 else ()
                # box bins i-3..i on axis 0 and pos..pos+3 elsewhere; center at the shared edge
                corner = (i - 3, *pos)
                best_at = tuple(float((lo + c + 2) * step) for c in corner)
    return max(best, 0), best_at if best_at is not None else (0.0,) * m


def _sample_max(blocks: list[np.ndarray], eps: float, m: int, centers: int):
    pts = np.concatenate(blocks)
    tree = cKDTree(pts)
    C = pts[:centers]
    counts = np.asarray(tree.query_ball_point(C, eps, p=np.inf, return_length=True))
    j = int(np.argmax(counts))
    return int(counts[j]), tuple(float(v) for v in C[j])


def diffuse_certify(qs: Sequence[AnyPoly], eps: float, method: str = "grid", samples: int = 2_000_000,
                    seed: Seed = Seed(0, 0), centers: int = 20_000,
                    threads: int | None = None) -> DiffuseCertificate:
    """Estimate ``N = sup_a Pr(|q_i(X) - a_i| <= eps for all i) / eps**m``.

    ``method="grid"`` counts one large sample into boxes on an ``eps/2`` lattice
    over ``[-R, R]**m``; ``method="sample"`` centers boxes at the first
    ``centers`` sample points and counts neighbours with a k-d tree.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    qs, n, norms = _prepare(qs)
    m = len(qs)
    blocks = _sample_values(qs, n, samples, seed, threads)
    if method == "grid":
        count, at = _grid_max(blocks, eps, m, samples)
    elif method == "sample":
        count, at = _sample_max(blocks, eps, m, min(centers, samples))
    else:
        raise ValueError(f"unknown method {method!r}")
    return DiffuseCertificate(float(eps), count / samples / eps ** m, m, at, method, samples, norms)


# ---------------------------------------------------------------------------
# derivative chain


def _derivative_tensors(h: Poly) -> list[list[Poly]]:
    """All ordered ``k``-th partial derivatives of ``h`` for ``k = 0..deg h``."""
    out = [[h]]
    for _ in range(h.degree):
        out.append([d.derivative(i) for d in out[-1] for i in range(h.n)])
    return out


def derivative_chain_check(h: AnyPoly, qs: Sequence[AnyPoly], eps: float, samples: int = 100_000,
                           seed: Seed = Seed(0, 0), constant: float = 50.0,
                           threads: int | None = None) -> dict:
    """Frequency with which ``|h| >= eps |Dh| >= eps**2 |D^2 h| >= ...`` fails at ``x = q(X)``.

    ``|D^k h|`` is the Frobenius norm of the tensor of ``k``-th partials.  The
    reported bound is ``constant * eps * log(1/eps)**(d m / 2 + 1)`` with ``d``
    the largest degree among the ``q_i``.
    """
    h = as_poly(h)
    qs = [as_poly(q) for q in qs]
    m = len(qs)
    if not 1 <= m <= MAX_M or h.n != m:
        raise ValueError(f"need h on m <= {MAX_M} variables matching len(q)")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    n = max(q.n for q in qs)
    qs = [q.with_n(n) for q in qs]
    levels = _derivative_tensors(h)
    t0 = time.perf_counter()
    sizes = _parallel.block_sizes(samples, SAMPLE_BLOCK)

    def work(b):
        X = _parallel.block_rng(seed.master, seed.stream, b).standard_normal((sizes[b], n))
        Y = np.stack([q.eval_batch(X) for q in qs], axis=1)
        norms = [np.sqrt(sum(d.eval_batch(Y) ** 2 for d in lv)) for lv in levels]
        fail = np.zeros(sizes[b], dtype=bool)
        for k in range(len(norms) - 1):
            fail |= eps ** k * norms[k] < eps ** (k + 1) * norms[k + 1]
        return np.array([fail.sum()], dtype=np.float64)

    count = float(_parallel.ordered_sum(_parallel.run_blocks(work, len(sizes), threads))[0])
    f = count / samples
    d = max(q.degree for q in qs)
    bound = constant * eps * math.log(1.0 / eps) ** (d * m / 2 + 1) if 0 < eps < 1 else float("inf")
    if eps == 0:
        bound = 0.0
    return {"eps": float(eps), "frequency": f, "stderr": math.sqrt(f * (1 - f) / samples),
            "bound": bound, "samples": samples, "wall_ms": (time.perf_counter() - t0) * 1e3}


__all__ = ["DiffuseCertificate", "diffuse_certify", "derivative_chain_check"]
