"""Distance between the hypercube and Gaussian distributions of a polynomial."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import _parallel
from ..kwise import Seed
from ..poly import AnyPoly, MAX_EXACT_VARS, multilinearize
from .reports import Report

MC_BLOCK = 1 << 15
MAX_VARS = 20


@dataclass
class InvarianceReport(Report):
    """Adds the per-``t`` CDF table, which is kept out of the CSV row."""

    table: list = field(default_factory=list)


def invariance_distance(p: AnyPoly, t_grid: Sequence[float], gaussian_samples: int = 200_000,
                        seed: Seed = Seed(0, 0), threads: int | None = None) -> InvarianceReport:
    """``sup_t |Pr(p(X) <= t) - Pr(p(A) <= t)|`` over ``t_grid``.

    The hypercube CDF is exact (full enumeration, ``n <= 20``); the Gaussian
    CDF is Monte Carlo.  ``params`` holds the maximizing ``t``.
    """
    ml = multilinearize(p)
    if ml.n > min(MAX_VARS, MAX_EXACT_VARS):
        raise ValueError(f"invariance distance needs n <= {MAX_VARS}, got {ml.n}")
    t0 = time.perf_counter()
    t = np.asarray(sorted(float(v) for v in t_grid))
    if t.size == 0:
        raise ValueError("empty t grid")
    slack = 1e-12 * max(1.0, math.sqrt(ml.l2_squared))
    cube = np.sort(ml.truth_table())
    cube_cdf = np.searchsorted(cube, t + slack, side="right") / cube.size
    q = ml.to_poly()
    sizes = _parallel.block_sizes(gaussian_samples, MC_BLOCK)

    def work(b):
        X = _parallel.block_rng(seed.master, seed.stream, b).standard_normal((sizes[b], q.n))
        v = np.sort(q.eval_batch(X))
        return np.searchsorted(v, t + slack, side="right").astype(np.float64)

    counts = _parallel.ordered_sum(_parallel.run_blocks(work, len(sizes), threads))
    gauss_cdf = counts / gaussian_samples
    dist = np.abs(gauss_cdf - cube_cdf)
    j = int(np.argmax(dist))
    se = math.sqrt(gauss_cdf[j] * (1 - gauss_cdf[j]) / gaussian_samples)
    table = [{"t": float(ti), "cube": float(c), "gauss": float(g)} for ti, c, g in zip(t, cube_cdf, gauss_cdf)]
    return InvarianceReport("invariance", float(dist[j]), se, gaussian_samples, seed.master,
                            (time.perf_counter() - t0) * 1e3, params={"n": ml.n, "t_star": float(t[j])},
                            table=table)


__all__ = ["InvarianceReport", "invariance_distance"]
