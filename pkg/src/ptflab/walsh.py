"""Fast Walsh-Hadamard transform and hypercube vertex encoding.

Vertices of {-1,1}^n are encoded as integers ``v`` in ``[0, 2**n)`` with bit
``i`` set iff ``x_i = -1``.  With this encoding the character of a subset
``S`` (a bitmask) is ``chi_S(v) = (-1)**popcount(S & v)`` and the unnormalised
Sylvester-ordered Hadamard matrix maps coefficient vectors to truth tables.
"""
from __future__ import annotations

import numpy as np


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along the last axis.

    Applying it twice multiplies by the length, so
    ``fwht(fwht(a)) / a.shape[-1] == a``.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    size = a.shape[-1]
    if size & (size - 1):
        raise ValueError(f"length {size} is not a power of two")
    lead = a.shape[:-1]
    h = 1
    while h < size:
        b = a.reshape(lead + (size // (2 * h), 2, h))
        x = b[..., 0, :]
        y = b[..., 1, :]
        a = np.stack((x + y, x - y), axis=-2).reshape(lead + (size,))
        h *= 2
    return a


def walsh_coefficients(truth_table: np.ndarray) -> np.ndarray:
    """Fourier-Walsh coefficients ``f_hat(S) = E[f(x) chi_S(x)]`` of a truth table."""
    return fwht(truth_table) / truth_table.shape[-1]


def popcounts(n: int) -> np.ndarray:
    """Popcount of every mask in ``[0, 2**n)``."""
    counts = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        counts[1 << i:1 << (i + 1)] = counts[:1 << i] + 1
    return counts


def vertex_matrix(n: int) -> np.ndarray:
    """All 2**n hypercube points as a ``(2**n, n)`` array of +-1 floats."""
    v = np.arange(1 << n, dtype=np.int64)
    bits = (v[:, None] >> np.arange(n)) & 1
    return 1.0 - 2.0 * bits


def sign(values: np.ndarray) -> np.ndarray:
    """Sign with the convention ``sgn(0) = +1``."""
    return np.where(np.asarray(values) >= 0, 1, -1).astype(np.int8)
