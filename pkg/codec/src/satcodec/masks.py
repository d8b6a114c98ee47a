"""Bit-flip mask files produced by the downlink simulator.

File contract (shared with the simulator, duplicated here on purpose so
this package has no import dependency on it): a mask file holds one flag
per payload bit, packed little-endian-bit-first into bytes, with a JSON
sidecar at ``<path>.json`` carrying at least ``n_bits``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def read_mask(path) -> np.ndarray:
    """Load one mask file as a flat uint8 array of 0/1 flags."""
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    packed = np.fromfile(path, dtype=np.uint8)
    return np.unpackbits(packed, bitorder="little")[: int(meta["n_bits"])]


def write_mask(path, flips: np.ndarray, metadata: dict | None = None) -> None:
    path = Path(path)
    flips = np.asarray(flips, dtype=np.uint8)
    np.packbits(flips, bitorder="little").tofile(path)
    sidecar = dict(metadata or {}, n_bits=int(len(flips)))
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar))


class MaskSource:
    """Pool of mask files; hands out per-image masks, reshuffled per epoch.

    Deterministic given (files, seed): epoch e uses a seeded permutation of
    the pool, constant within the epoch.
    """

    def __init__(self, paths, payload_bits: int, seed: int = 0):
        paths = sorted(Path(p) for p in paths)
        if not paths:
            raise ValueError("no mask files given")
        self.masks = np.stack([read_mask(p) for p in paths])
        if self.masks.shape[1] != payload_bits:
            raise ValueError(
                f"masks carry {self.masks.shape[1]} bits, budget is {payload_bits}")
        self.seed = seed

    def __len__(self):
        return len(self.masks)

    def epoch_masks(self, epoch: int, count: int) -> np.ndarray:
        """count masks for the given epoch, sampled with replacement."""
        rng = np.random.default_rng((self.seed, epoch))
        idx = rng.integers(0, len(self.masks), count)
        return self.masks[idx]


def zero_mask_source(payload_bits: int, count: int = 1) -> "MaskSource":
    """An identity channel: all-zero masks, for ablations."""
    src = MaskSource.__new__(MaskSource)
    src.masks = np.zeros((count, payload_bits), dtype=np.uint8)
    src.seed = 0
    return src
