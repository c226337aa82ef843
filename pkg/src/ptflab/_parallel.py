"""Deterministic block-parallel execution.

Work is split into fixed-size blocks.  Block ``b`` draws randomness only from
``block_rng(master, stream, ..., b)``, and results are combined in block order, so
outputs do not depend on the thread count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

THREADS_ENV = "PTF_LAB_THREADS"
DEFAULT_BLOCK = 1 << 14


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else ``PTF_LAB_THREADS``, else 1; ``0`` means all cores."""
    if threads is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        threads = int(env) if env else 1
    if threads < 0:
        raise ValueError("thread count must be non-negative")
    return threads or (os.cpu_count() or 1)


def block_rng(master: int, *path: int) -> np.random.Generator:
    """Independent generator for the sub-stream named by ``(master, *path)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master, *path])))


def block_sizes(total: int, block: int = DEFAULT_BLOCK) -> list[int]:
    full, rest = divmod(total, block)
    return [block] * full + ([rest] if rest else [])


def run_blocks(fn: Callable[[int], T], n_blocks: int, threads: int | None = None) -> list[T]:
    """``[fn(0), ..., fn(n_blocks - 1)]``, evaluated on a thread pool."""
    threads = resolve_threads(threads)
    if threads == 1 or n_blocks <= 1:
        return [fn(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=min(threads, n_blocks)) as pool:
        return list(pool.map(fn, range(n_blocks)))


def ordered_sum(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Left-to-right sum, fixing the floating-point reduction order."""
    out = None
    for part in parts:
        out = np.array(part, dtype=np.float64, copy=True) if out is None else out + part
    return out
