"""Differentiable XOR as a fixed two-layer ReLU network.

For a, b in {0, 1}:  xor(a, b) = relu(a + b) - 2 * relu(a + b - 1),
which is exact on the truth table and piecewise-linear in between, so
gradients flow through the data input while a hard bit mask stays fixed.
"""

from __future__ import annotations

import torch
from torch import nn


class XorLayer(nn.Module):
    """Elementwise xor(x, mask); weights are analytic constants, not trained."""

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        s = x + mask
        return torch.relu(s) - 2.0 * torch.relu(s - 1.0)
