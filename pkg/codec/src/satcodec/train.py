"""Two-stage training, evaluation under injected bit flips, and the
fixed-subsampling baseline the channel-aware codec is judged against."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .data import kfold_indices
from .masks import MaskSource
from .model import ChannelLayer, Codec, CodecConfig, Decoder
from .quant import bits_to_levels, dequantize, levels_to_bits, quantize


def _class_weights(labels: torch.Tensor, n_classes: int) -> torch.Tensor:
    counts = torch.bincount(labels, minlength=n_classes).float()
    w = 1.0 / torch.clamp(counts, min=1.0)
    return w * (n_classes / w.sum())


def _loss(recon, logits, images, labels, weights, ce_weight: float = 0.1):
    return (F.mse_loss(recon, images)
            + ce_weight * F.cross_entropy(logits, labels, weight=weights))


def _epoch_mask_tensor(masks: MaskSource, epoch: int, n: int) -> torch.Tensor:
    return torch.from_numpy(masks.epoch_masks(epoch, n).astype(np.float32))


def _run_epochs(model_forward, parameters, images, labels, masks, epochs,
                batch_size, lr, seed, weights):
    opt = torch.optim.Adam(parameters, lr=lr)
    n = len(images)
    history = []
    for epoch in range(epochs):
        epoch_masks = _epoch_mask_tensor(masks, epoch, n)
        order = torch.from_numpy(np.random.default_rng((seed, epoch)).permutation(n))
        total = 0.0
        for i in range(0, n, batch_size):
            idx = order[i:i + batch_size]
            recon, logits = model_forward(images[idx], epoch_masks[idx])
            loss = _loss(recon, logits, images[idx], labels[idx], weights)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        history.append(total / n)
    return history


def train_stage1(images, labels, masks: MaskSource, config: CodecConfig | None = None,
                 epochs: int = 10, batch_size: int = 32, lr: float = 1e-3,
                 seed: int = 0):
    """End-to-end training with the bit-flip channel between the halves."""
    config = config or CodecConfig()
    if masks.masks.shape[1] != config.payload_budget_bits:
        raise ValueError("mask bit count does not match the payload budget")
    torch.manual_seed(seed)
    model = Codec(config)
    model.train()
    weights = _class_weights(labels, config.n_classes)
    history = _run_epochs(model, model.parameters(), images, labels, masks,
                          epochs, batch_size, lr, seed, weights)
    return model, history


def train_stage2(model: Codec, images, labels, masks: MaskSource,
                 epochs: int = 10, batch_size: int = 32, lr: float = 1e-3,
                 seed: int = 1):
    """Freeze the encoder; retrain the decoder on discretized waist values."""
    for p in model.encoder.parameters():
        p.requires_grad_(False)
    model.train()
    model.encoder.eval()  # also freezes batch-norm running statistics
    weights = _class_weights(labels, model.config.n_classes)
    forward = lambda x, m: model(x, m, discretize=True)
    history = _run_epochs(forward, model.decoder.parameters(), images, labels,
                          masks, epochs, batch_size, lr, seed, weights)
    for p in model.encoder.parameters():
        p.requires_grad_(True)
    return model, history


def cross_validate(images, labels, masks: MaskSource,
                   config: CodecConfig | None = None, folds: int = 5,
                   epochs: int = 10, batch_size: int = 32, lr: float = 1e-3,
                   seed: int = 0):
    """K-fold cross-validation of stage-1 training.

    -> list of per-fold evaluate() dicts on the held-out fold.
    """
    results = []
    for f, (tr_idx, va_idx) in enumerate(kfold_indices(len(images), folds, seed)):
        model, _ = train_stage1(images[tr_idx], labels[tr_idx], masks, config,
                                epochs, batch_size, lr, seed=seed + f)
        results.append(evaluate(model, images[va_idx], labels[va_idx], masks,
                                seed=seed + f))
    return results


@torch.no_grad()
def _corrupt_levels(levels: torch.Tensor, mask_bits: torch.Tensor, k: int):
    """Exact integer XOR of serialized signature bits against masks."""
    bits = levels_to_bits(levels, k)
    flipped = bits ^ mask_bits.long()
    return bits_to_levels(flipped, k)


@torch.no_grad()
def transmit(model: Codec, images, mask_bits: torch.Tensor):
    """Full hard pipeline: encode, quantize, flip bits, decode."""
    k = model.config.bits_per_value
    b = images.shape[0]
    levels = quantize(model.encoder(images).reshape(b, -1), k)
    levels = _corrupt_levels(levels, mask_bits, k)
    waist = dequantize(levels, k).reshape(
        b, model.config.waist_channels, model.config.waist_hw,
        model.config.waist_hw)
    return model.decoder(waist)


@torch.no_grad()
def evaluate(model, images, labels, masks: MaskSource, seed: int = 0,
             transmit_fn=None):
    """-> dict with per-pixel MSE, PSNR (dB over [0,1]), confusion, accuracy."""
    model.eval()
    mask_bits = _epoch_mask_tensor(masks, seed, len(images))
    recon, logits = (transmit_fn or transmit)(model, images, mask_bits)
    mse = float(F.mse_loss(recon, images))
    psnr = float(-10.0 * np.log10(max(mse, 1e-12)))
    pred = logits.argmax(dim=1)
    n_cls = logits.shape[1]
    confusion = np.zeros((n_cls, n_cls), dtype=int)
    for t, p in zip(labels.tolist(), pred.tolist()):
        confusion[t, p] += 1
    return {"mse": mse, "psnr_db": psnr, "confusion": confusion,
            "accuracy": float((pred == labels).float().mean())}


class SubsampleBaseline(nn.Module):
    """Fixed satellite side: average-pool the image to 3x9x9 at 8 bits per
    value (1944 of the 2048 budget bits); only the ground decoder trains."""

    HW = 9
    K = 8

    def __init__(self, n_classes: int = 10, payload_budget_bits: int = 2048):
        super().__init__()
        self.n_values = 3 * self.HW**2
        self.payload_budget_bits = payload_budget_bits
        if self.n_values * self.K > payload_budget_bits:
            raise ValueError("subsampled payload exceeds the bit budget")
        # decoder configured for the 3x9x9 waist; upsample path sized by hand
        self.fanout = nn.Linear(self.n_values, self.n_values)
        self.recon = nn.Sequential(
            nn.Conv2d(3, 24, 3, padding=1),
            nn.BatchNorm2d(24), nn.ReLU(),
            nn.Upsample(size=(32, 32), mode="nearest"),
            nn.Conv2d(24, 12, 5, padding=2),
            nn.BatchNorm2d(12), nn.ReLU(),
            nn.Upsample(size=(64, 64), mode="nearest"),
            nn.Conv2d(12, 3, 7, padding=3), nn.Sigmoid(),
        )
        self.classify = nn.Sequential(
            nn.Conv2d(3, 16, 3, stride=2, padding=1),
            nn.BatchNorm2d(16), nn.ReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.BatchNorm2d(32), nn.ReLU(),
            nn.Flatten(),
            nn.Linear(32 * 3 * 3, n_classes),
        )

    def waist_levels(self, images: torch.Tensor) -> torch.Tensor:
        small = F.adaptive_avg_pool2d(images, self.HW)  # values in [0, 1]
        return quantize(small.reshape(images.shape[0], -1) * 2.0 - 1.0, self.K)

    def decode_levels(self, levels: torch.Tensor):
        vals = (dequantize(levels, self.K) + 1.0) / 2.0
        z = self.fanout(vals).reshape(-1, 3, self.HW, self.HW)
        return self.recon(z), self.classify(z)

    def forward(self, images: torch.Tensor, mask_bits: torch.Tensor):
        levels = self.waist_levels(images)
        levels = _corrupt_levels(levels, mask_bits[:, : self.n_values * self.K],
                                 self.K)
        return self.decode_levels(levels)


def train_baseline(images, labels, masks: MaskSource, epochs: int = 10,
                   batch_size: int = 32, lr: float = 1e-3, seed: int = 0):
    torch.manual_seed(seed)
    model = SubsampleBaseline()
    model.train()
    weights = _class_weights(labels, 10)
    history = _run_epochs(model, model.parameters(), images, labels, masks,
                          epochs, batch_size, lr, seed, weights)
    return model, history
