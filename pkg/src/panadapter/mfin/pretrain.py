"""Desk-scale stand-in for the ViT restoration pretraining: denoising plus SR on Q-shaped inputs."""

from __future__ import annotations

import numpy as np

from ..gradcore import Tensor, ops
from ..sspen.pretrain import train_restoration
from ..waldsim import SceneSpec, degrade, sample_seed, synth_pan, synth_scene
from .vit import RestorationHead, VitBackbone


def restoration_corpus(seed: int, count: int, bands: int, size: int, noise: float = 0.01,
                       sigma: float = 1.7, ratio: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Clean ``Q``-like stacks (bands + PAN) and their degraded-then-noised inputs."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7669]))
    xs, ys = [], []
    for i in range(count):
        # offset the index so these scenes differ from the EDSR corpus
        scene = synth_scene(SceneSpec(seed=sample_seed(seed, "pretrain", 10_000 + i), size=size,
                                      bands=bands))
        target = np.concatenate([scene, synth_pan(scene, [1.0 / bands] * bands)], axis=-1)
        target = target.astype(np.float32)
        up = ops.upsample_bicubic(Tensor(degrade(target, sigma, ratio)), ratio).data
        xs.append((up + rng.normal(0.0, noise, size=up.shape)).astype(np.float32))
        ys.append(target)
    return np.stack(xs), np.stack(ys)


def pretrain_vit(vit: VitBackbone, seed: int, steps: int, bands: int, size: int = 64,
                 corpus_size: int = 8, batch: int = 4, lr: float = 1e-3) -> list[float]:
    """Train ``vit`` with a throwaway head, then freeze it; returns the loss history."""
    head = RestorationHead(vit, np.random.default_rng(np.random.SeedSequence([seed, 0x68])))
    inputs, targets = restoration_corpus(seed, corpus_size, bands, size)
    history = train_restoration(head, inputs, targets, steps, seed, batch=batch, lr=lr)
    vit.freeze()
    return history
