"""Desk-scale stand-in for DIV2K pretraining: seeded synthetic super-resolution."""

from __future__ import annotations

import logging

import numpy as np

from ..gradcore import Tensor, ops
from ..waldsim import SceneSpec, degrade, sample_seed, synth_pan, synth_scene
from .edsr import EdsrBackbone

log = logging.getLogger(__name__)


def sr_corpus(seed: int, count: int, bands: int, crop: int, with_pan: bool,
              sigma: float = 1.7, ratio: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """``(inputs, targets)`` of shape ``(count, crop, crop, c)`` from held-out scenes.

    Inputs are bicubic re-upsampled degraded targets, so the backbone learns
    same-size restoration.
    """
    xs, ys = [], []
    for i in range(count):
        scene = synth_scene(SceneSpec(seed=sample_seed(seed, "pretrain", i), size=crop, bands=bands))
        if with_pan:
            scene = np.concatenate([scene, synth_pan(scene, [1.0 / bands] * bands)], axis=-1)
        hr = scene.astype(np.float32)
        lr = degrade(hr, sigma, ratio)
        xs.append(ops.upsample_bicubic(Tensor(lr), ratio).data)
        ys.append(hr)
    return np.stack(xs), np.stack(ys)


def train_restoration(model, inputs: np.ndarray, targets: np.ndarray, steps: int, seed: int,
                      batch: int = 4, lr: float = 1e-3, clip: float = 1.0) -> list[float]:
    """L1 training of ``model(x) -> y``; returns the per-step loss history."""
    from ..pipeline.optim import run_optimizer

    def loss_at(idx):
        return ops.l1_loss(model(Tensor(inputs[idx])), Tensor(targets[idx]))

    def report(step, value):
        if step % 50 == 0:
            log.info("pretrain step %d loss %.6f", step, value)

    history, _ = run_optimizer(model.parameters(), loss_at, len(inputs), steps, batch, lr, seed,
                               clip, on_step=report)
    return history


def pretrain_edsr(backbone: EdsrBackbone, seed: int, steps: int, bands: int, crop: int = 32,
                  corpus_size: int = 8, batch: int = 4, lr: float = 1e-3) -> list[float]:
    """Train ``backbone`` on synthetic SR, then freeze it; returns the loss history."""
    with_pan = backbone.in_ch == bands + 1
    inputs, targets = sr_corpus(seed, corpus_size, bands, crop, with_pan)
    history = train_restoration(backbone, inputs, targets, steps, seed, batch=batch, lr=lr)
    backbone.freeze()
    return history
