"""k-bit uniform midpoint quantization over [-1, 1], torch edition, with
bit (de)serialization matching the simulator's mask bit order: values in
flattened (C, H, W) order, most-significant bit of each value first."""

from __future__ import annotations

import torch


def quantize(x: torch.Tensor, k: int) -> torch.Tensor:
    """Values in [-1, 1] -> integer levels 0 .. 2^k - 1."""
    n = 1 << k
    return torch.clamp(torch.floor((x + 1.0) * (n / 2.0)), 0, n - 1).long()


def dequantize(level: torch.Tensor, k: int) -> torch.Tensor:
    """Integer levels -> cell midpoints in (-1, 1)."""
    n = 1 << k
    return -1.0 + (level.to(torch.float32) + 0.5) * (2.0 / n)


def levels_to_bits(level: torch.Tensor, k: int) -> torch.Tensor:
    """(..., V) levels -> (..., V*k) bits, MSB first per value."""
    shifts = torch.arange(k - 1, -1, -1, device=level.device)
    bits = (level.unsqueeze(-1) >> shifts) & 1
    return bits.reshape(*level.shape[:-1], level.shape[-1] * k)

def bits_to_levels(bits: torch.Tensor, k: int) -> torch.Tensor:
    """Inverse of levels_to_bits (accepts float or int bits)."""
    b = bits.reshape(*bits.shape[:-1], bits.shape[-1] // k, k)
    weights = (1 << torch.arange(k - 1, -1, -1, device=bits.device)).to(b.dtype)
    return (b * weights).sum(-1).long()
