"""Local Prior Extraction taps and per-branch prior aggregation."""

from __future__ import annotations

import numpy as np

from ..gradcore import DepthwiseConv2d, Linear, Module, ops
from .edsr import EdsrBackbone


class LpeBlock(Module):
    """1x1 channel reduction, depthwise 3x3, GELU."""

    def __init__(self, channels: int, reduced: int, rng: np.random.Generator):
        if reduced >= channels:
            raise ValueError(f"LPE output dim {reduced} must be below backbone width {channels}")
        self.reduce = Linear(channels, reduced, rng)
        self.local = DepthwiseConv2d(reduced, 3, rng)

    def forward(self, x):
        return ops.gelu(self.local(self.reduce(x)))


class PriorBranch(Module):
    """Frozen backbone + one LPE per block + linear down-projection to ``prior_dim``."""

    def __init__(self, in_ch: int, channels: int, n_blocks: int, lpe_dim: int, prior_dim: int,
                 rng: np.random.Generator):
        self.backbone = EdsrBackbone(in_ch, channels, n_blocks, rng)
        self.lpe = [LpeBlock(channels, lpe_dim, rng) for _ in range(n_blocks)]
        self.proj = Linear(n_blocks * lpe_dim, prior_dim, rng)

    def taps(self, x) -> list:
        return self.backbone.features(x)

    def prior_from_taps(self, taps):
        if len(taps) != len(self.lpe):
            raise ValueError(f"expected {len(self.lpe)} backbone taps, got {len(taps)}")
        reduced = [lpe(c) for lpe, c in zip(self.lpe, taps)]
        return self.proj(ops.concat_channels(reduced))

    def forward(self, x):
        return self.prior_from_taps(self.taps(x))
