"""Channel-aware image autoencoder.

Satellite side: three convolutions squeeze a 3x64x64 image into a small
bounded "waist" (default 2x16x16 values in (-1, 1)) that quantizes to a
fixed 2048-bit signature.  Ground side: a shared fully-connected fan-out
feeds a reconstruction head and a land-use classification head.  During
training a channel layer between the two injects the bit flips recorded
by the downlink simulator so the ground network learns to decode through
them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .quant import bits_to_levels, dequantize, levels_to_bits, quantize
from .xor import XorLayer

VALID_BITS = (1, 2, 4, 8)


@dataclass(frozen=True)
class CodecConfig:
    waist_channels: int = 2
    waist_hw: int = 16
    bits_per_value: int = 4
    payload_budget_bits: int = 2048
    n_classes: int = 10

    def __post_init__(self):
        if self.bits_per_value not in VALID_BITS:
            raise ValueError(f"bits_per_value must be one of {VALID_BITS}")
        used = self.waist_channels * self.waist_hw**2 * self.bits_per_value
        if used != self.payload_budget_bits:
            raise ValueError(
                f"waist uses {used} bits, budget is {self.payload_budget_bits}")

    @property
    def n_values(self) -> int:
        return self.waist_channels * self.waist_hw**2


@dataclass(frozen=True)
class Signature:
    levels: np.ndarray  # (C, H, W) integer levels
    bits_per_value: int

    def to_bits(self) -> np.ndarray:
        t = torch.from_numpy(self.levels.reshape(1, -1))
        return levels_to_bits(t, self.bits_per_value).numpy().ravel().astype(np.uint8)

    @classmethod
    def from_bits(cls, bits: np.ndarray, config: CodecConfig) -> "Signature":
        if len(bits) != config.payload_budget_bits:
            raise ValueError(
                f"expected {config.payload_budget_bits} bits, got {len(bits)}")
        t = torch.from_numpy(np.asarray(bits, dtype=np.int64).reshape(1, -1))
        levels = bits_to_levels(t, config.bits_per_value).numpy()
        shape = (config.waist_channels, config.waist_hw, config.waist_hw)
        return cls(levels.reshape(shape), config.bits_per_value)


class Encoder(nn.Module):
    """3 conv+ReLU stages, growing feature counts / shrinking filters,
    final tanh bounding the waist to (-1, 1).  Small enough to uplink."""

    def __init__(self, config: CodecConfig):
        super().__init__()
        c = config.waist_channels
        self.net = nn.Sequential(
            nn.Conv2d(3, 12, 7, stride=2, padding=3),
            nn.BatchNorm2d(12), nn.ReLU(),
            nn.Conv2d(12, 24, 5, stride=2, padding=2),
            nn.BatchNorm2d(24), nn.ReLU(),
            nn.Conv2d(24, c, 3, stride=1, padding=1), nn.Tanh(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-3:] != (3, 64, 64):
            raise ValueError(f"expected 3x64x64 input, got {tuple(x.shape[-3:])}")
        return self.net(x)


class Decoder(nn.Module):
    """Shared FC fan-out, then mirrored reconstruction and class heads."""

    def __init__(self, config: CodecConfig):
        super().__init__()
        self.config = config
        n = config.n_values
        c, hw = config.waist_channels, config.waist_hw
        self.fanout = nn.Linear(n, n)
        self.shape = (c, hw, hw)
        self.recon = nn.Sequential(
            nn.Conv2d(c, 24, 3, padding=1),
            nn.BatchNorm2d(24), nn.ReLU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(24, 12, 5, padding=2),
            nn.BatchNorm2d(12), nn.ReLU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(12, 3, 7, padding=3), nn.Sigmoid(),
        )
        self.classify = nn.Sequential(
            nn.Conv2d(c, 16, 3, stride=2, padding=1),
            nn.BatchNorm2d(16), nn.ReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.BatchNorm2d(32), nn.ReLU(),
            nn.Flatten(),
            nn.Linear(32 * (hw // 4) ** 2, config.n_classes),
        )

    def forward(self, waist: torch.Tensor):
        """waist (B, C, H, W) -> (reconstruction, class logits)."""
        b = waist.shape[0]
        z = self.fanout(waist.reshape(b, -1)).reshape(b, *self.shape)
        return self.recon(z), self.classify(z)


class ChannelLayer(nn.Module):
    """Injects mask-driven bit flips between encoder and decoder.

    k = 1: a multiplicative mask layer (a flipped sign bit negates
    the value).  k > 1: the value is discretized (straight-through), its
    bits run through the differentiable XOR against the mask, and only the
    flip-induced *delta* is added, so an all-zero mask is the exact
    identity and gradients pass through unchanged.
    """

    def __init__(self, config: CodecConfig):
        super().__init__()
        self.k = config.bits_per_value
        self.xor = XorLayer()

    def forward(self, waist: torch.Tensor, mask_bits: torch.Tensor) -> torch.Tensor:
        b = waist.shape[0]
        flat = waist.reshape(b, -1)
        mask = mask_bits.to(flat.dtype)
        if self.k == 1:
            out = flat * (1.0 - 2.0 * mask)
        else:
            with torch.no_grad():
                levels = quantize(flat, self.k)
                clean = dequantize(levels, self.k)
                bits = levels_to_bits(levels, self.k).to(flat.dtype)
            flipped = self.xor(bits, mask)
            corrupted = dequantize(bits_to_levels(flipped, self.k), self.k)
            out = flat + (corrupted - clean).detach()
        return out.reshape_as(waist)


class Codec(nn.Module):
    def __init__(self, config: CodecConfig | None = None):
        super().__init__()
        self.config = config or CodecConfig()
        self.encoder = Encoder(self.config)
        self.decoder = Decoder(self.config)
        self.channel = ChannelLayer(self.config)

    @torch.no_grad()
    def encode(self, image: torch.Tensor) -> Signature:
        """3x64x64 image in [0, 1] -> quantized signature."""
        was_training = self.training
        self.eval()  # inference path: use running batch-norm statistics
        try:
            waist = self.encoder(image.reshape(1, 3, 64, 64))
        finally:
            self.train(was_training)
        levels = quantize(waist, self.config.bits_per_value)
        return Signature(levels[0].cpu().numpy(), self.config.bits_per_value)

    @torch.no_grad()
    def decode(self, signature: Signature):
        """Signature -> (3x64x64 reconstruction, class probabilities[10])."""
        if signature.levels.shape != (self.config.waist_channels,
                                      self.config.waist_hw, self.config.waist_hw):
            raise ValueError("signature shape does not match codec config")
        waist = dequantize(torch.from_numpy(signature.levels).unsqueeze(0),
                           self.config.bits_per_value)
        was_training = self.training
        self.eval()
        try:
            recon, logits = self.decoder(waist)
        finally:
            self.train(was_training)
        return recon[0], torch.sigmoid(logits[0])

    def forward(self, images: torch.Tensor, mask_bits: torch.Tensor,
                discretize: bool = False):
        waist = self.encoder(images)
        if discretize:  # stage-2 style straight-through midpoint collapse
            waist = waist + (dequantize(
                quantize(waist, self.config.bits_per_value),
                self.config.bits_per_value) - waist).detach()
        waist = self.channel(waist, mask_bits)
        return self.decoder(waist)
