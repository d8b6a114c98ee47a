"""Synthetic 10-class 64x64 RGB land-cover stand-in.

Each class is a palette plus an oriented texture (frequency/direction pair)
with per-image jitter, so separating classes needs both color and spatial
detail — coarse subsampling loses accuracy, which is the regime the codec
is built for.  Fully deterministic given (n_images, seed).
"""

from __future__ import annotations

import numpy as np
import torch

N_CLASSES = 10

# (r, g, b) base palette and (cycles across image, orientation rad) texture.
# Palettes repeat across class pairs and the carriers sit well above the
# Nyquist limit of a coarse thumbnail, so class identity lives in spatial
# texture that average-pooling wipes out — like the land-cover imagery this
# stands in for, where crop rows and urban grids separate scenes that share
# a color histogram.
_CLASS_STYLE = [
    ((0.20, 0.45, 0.15), (8.0, 0.2)),
    ((0.20, 0.45, 0.15), (14.0, 1.2)),
    ((0.55, 0.50, 0.30), (9.0, 0.9)),
    ((0.55, 0.50, 0.30), (15.0, 0.1)),
    ((0.10, 0.25, 0.50), (8.0, 1.4)),
    ((0.10, 0.25, 0.50), (13.0, 0.5)),
    ((0.45, 0.35, 0.30), (10.0, 0.0)),
    ((0.45, 0.35, 0.30), (16.0, 1.0)),
    ((0.30, 0.35, 0.55), (11.0, 0.7)),
    ((0.30, 0.35, 0.55), (17.0, 1.35)),
]


def make_dataset(n_images: int, seed: int = 0):
    """-> (images float32 (N, 3, 64, 64) in [0, 1], labels int64 (N,))."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:64, 0:64] / 64.0
    images = np.empty((n_images, 3, 64, 64), dtype=np.float32)
    labels = rng.integers(0, N_CLASSES, n_images)
    for i, cls in enumerate(labels):
        color, (freq, ang) = _CLASS_STYLE[cls]
        f = freq * rng.uniform(0.85, 1.15)
        a = ang + rng.normal(0.0, 0.1)
        phase = rng.uniform(0, 2 * np.pi)
        carrier = np.sin(2 * np.pi * f * (xx * np.cos(a) + yy * np.sin(a)) + phase)
        shade = 0.5 + 0.5 * carrier
        tint = rng.normal(0.0, 0.03, 3)
        for ch in range(3):
            img = color[ch] * (0.7 + 0.6 * shade) + tint[ch]
            img += rng.normal(0.0, 0.02, (64, 64))
            images[i, ch] = np.clip(img, 0.0, 1.0)
    return torch.from_numpy(images), torch.from_numpy(labels)


def split_train_test(images, labels, train_fraction: float = 0.5, seed: int = 1):
    """Disjoint shuffled split; raises if the fraction leaves a side empty."""
    n = len(images)
    n_train = int(round(train_fraction * n))
    if not 0 < n_train < n:
        raise ValueError("split leaves an empty train or test side")
    perm = torch.from_numpy(np.random.default_rng(seed).permutation(n))
    tr, te = perm[:n_train], perm[n_train:]
    return (images[tr], labels[tr]), (images[te], labels[te])


def kfold_indices(n: int, folds: int = 5, seed: int = 0):
    """Disjoint (train_idx, val_idx) pairs covering 0..n-1 exactly once."""
    perm = np.random.default_rng(seed).permutation(n)
    parts = np.array_split(perm, folds)
    out = []
    for i in range(folds):
        val = parts[i]
        train = np.concatenate([parts[j] for j in range(folds) if j != i])
        out.append((train, val))
    return out
