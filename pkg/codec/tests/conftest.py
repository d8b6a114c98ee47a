"""Shared fixtures: CLI-produced bit masks and the one expensive training run.

The mask files come from the downlink simulator's command-line interface --
this package deliberately never imports it, only reads the files it emits.
"""

import glob
import subprocess

import pytest
import torch

from satcodec.data import make_dataset, split_train_test
from satcodec.masks import MaskSource
from satcodec.train import (evaluate, train_baseline, train_stage1,
                            train_stage2)

PAYLOAD_BITS = 2048


@pytest.fixture(scope="session")
def mask_dir(tmp_path_factory):
    """Run the downlink simulator CLI end to end and export bit masks."""
    root = tmp_path_factory.mktemp("downlink")
    pass_dir, out_dir = root / "pass", root / "masks"
    subprocess.run(
        ["lorasat", "simulate-pass", "--snr-db", "-12",
         "--payload-bytes", "256", "--seed", "11", "--out-dir", str(pass_dir)],
        check=True, capture_output=True)
    traces = sorted(glob.glob(str(pass_dir / "slot*_trace.csv")))
    assert traces, "simulate-pass produced no symbol traces"
    subprocess.run(
        ["lorasat", "export-masks", "--trace-csv", *traces,
         "--payload-bytes", "256", "--count", "300", "--seed", "5",
         "--out-dir", str(out_dir)],
        check=True, capture_output=True)
    return out_dir


@pytest.fixture(scope="session")
def mask_paths(mask_dir):
    paths = sorted(glob.glob(str(mask_dir / "mask*.bin")))
    assert len(paths) == 300
    return paths


@pytest.fixture(scope="session")
def dataset():
    images, labels = make_dataset(1000, seed=0)
    return split_train_test(images, labels, 0.5, seed=1)


@pytest.fixture(scope="session")
def trained(dataset, mask_paths):
    """One full training run reused by the smoke, ablation and loss tests.

    -> dict with the stage-1 snapshot, the stage-2 model, the baseline,
    their held-out metrics under injected masks, and the loss histories.
    """
    import copy

    (tr_x, tr_y), (te_x, te_y) = dataset
    masks = MaskSource(mask_paths, PAYLOAD_BITS, seed=3)
    eval_masks = MaskSource(mask_paths, PAYLOAD_BITS, seed=9)

    model, h1 = train_stage1(tr_x, tr_y, masks, epochs=10, seed=0)
    stage1 = copy.deepcopy(model)
    r1 = evaluate(model, te_x, te_y, eval_masks, seed=0)
    model, h2 = train_stage2(model, tr_x, tr_y, masks, epochs=5, seed=1)
    r2 = evaluate(model, te_x, te_y, eval_masks, seed=0)
    baseline, hb = train_baseline(tr_x, tr_y, masks, epochs=10, seed=0)
    rb = evaluate(baseline, te_x, te_y, eval_masks, seed=0,
                  transmit_fn=lambda m, x, bits: m(x, bits))
    return {"stage1": stage1, "stage2": model, "baseline": baseline,
            "r1": r1, "r2": r2, "rb": rb, "h1": h1, "h2": h2, "hb": hb,
            "test": (te_x, te_y), "eval_masks": eval_masks}
