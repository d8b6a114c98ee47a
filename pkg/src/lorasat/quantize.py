"""Uniform k-bit midpoint quantization over [-1, 1].

2^k equal-width cells; reconstruction returns the cell midpoint, so the
expected absolute error for uniformly distributed inputs is 1/2^(k+1).
Scalar in, scalar out; array in, array out.
"""

from __future__ import annotations

import numpy as np


def _check_bits(k: int) -> int:
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"bits per value must be a positive integer, got {k}")
    return int(k)


def quantize(x, k: int):
    """Map values in [-1, 1] to integer levels 0 .. 2^k - 1."""
    k = _check_bits(k)
    n = 1 << k
    level = np.floor((np.asarray(x, dtype=float) + 1.0) * (n / 2.0))
    level = np.clip(level, 0, n - 1).astype(int)
    return level if np.ndim(x) else int(level)


def dequantize(level, k: int):
    """Map integer levels back to the midpoints of their cells."""
    k = _check_bits(k)
    n = 1 << k
    lvl = np.asarray(level)
    if np.any(lvl < 0) or np.any(lvl >= n):
        raise ValueError(f"level outside 0..{n - 1}")
    x = -1.0 + (lvl + 0.5) * (2.0 / n)
    return x if np.ndim(level) else float(x)


def quantize_roundtrip(x, k: int):
    """Convenience: the value the receiver reconstructs for x."""
    return dequantize(quantize(x, k), k)
