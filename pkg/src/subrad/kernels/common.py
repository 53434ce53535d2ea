"""Shared pieces of the integration backends.

Dormand-Prince 5(4) tableau (the classic DOPRI5 pair, first-same-as-last)
and cached bit-index tables for the 2^N product basis.  Basis convention:
basis index b encodes atom j in bit j, bit value 1 = excited.
"""

from functools import lru_cache

import numpy as np

# Dormand-Prince 5(4) coefficients.
DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])

DP_A = np.zeros((6, 5))
DP_A[1, 0] = 1 / 5
DP_A[2, :2] = (3 / 40, 9 / 40)
DP_A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
DP_A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
DP_A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)

DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])

# Error weights, including the trailing FSAL stage.
DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

# Step controller constants (standard Hairer/Shampine values).
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -0.2  # fifth-order pair


@lru_cache(maxsize=None)
def bit_table(n_atoms):
    """(dim, bits) where bits[b, j] is bit j of basis index b."""
    dim = 1 << n_atoms
    idx = np.arange(dim)
    bits = (idx[:, None] >> np.arange(n_atoms)[None, :]) & 1
    bits = bits.astype(np.uint8)
    bits.setflags(write=False)
    return dim, bits


@lru_cache(maxsize=None)
def popcounts(n_atoms):
    """Number of excited atoms for every basis index."""
    dim, bits = bit_table(n_atoms)
    counts = bits.sum(axis=1).astype(np.int64)
    counts.setflags(write=False)
    return counts


def select_initial_step(rhs, t0, y0, f0, t_end, rtol, atol, max_step):
    """Initial step-size heuristic for an order-5 explicit pair.

    Classic two-probe estimate: balance the size of the state against its
    derivative, then refine with one Euler trial step.
    """
    scale = atol + rtol * np.abs(y0)
    size = np.sqrt(y0.size)
    d0 = np.linalg.norm(y0 / scale) / size
    d1 = np.linalg.norm(f0 / scale) / size
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, t_end - t0) if t_end > t0 else h0

    y1 = y0 + h0 * f0
    f1 = rhs(y1)
    d2 = np.linalg.norm((f1 - f0) / scale) / size / h0

    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step, t_end - t0 if t_end > t0 else h1)
