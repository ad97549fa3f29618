"""EDSR-style residual CNN used as the frozen stage-1 backbone."""

from __future__ import annotations

import numpy as np

from ..gradcore import Conv2d, Module, ops


class ResBlock(Module):
    def __init__(self, channels: int, rng: np.random.Generator):
        self.conv1 = Conv2d(channels, channels, 3, rng)
        self.conv2 = Conv2d(channels, channels, 3, rng)

    def forward(self, x):
        return ops.add(x, self.conv2(ops.relu(self.conv1(x))))


class EdsrBackbone(Module):
    """Head conv, ``n_blocks`` residual blocks, tail conv; extents preserved.

    :meth:`features` returns the output of every residual block, which is
    what the LPE taps read.  :meth:`forward` is the restoration mapping used
    for pretraining: the input is refined by a global residual.
    """

    def __init__(self, in_ch: int, channels: int, n_blocks: int, rng: np.random.Generator,
                 out_ch: int | None = None):
        self.in_ch = in_ch
        self.head = Conv2d(in_ch, channels, 3, rng)
        self.blocks = [ResBlock(channels, rng) for _ in range(n_blocks)]
        self.tail = Conv2d(channels, out_ch or in_ch, 3, rng)

    def features(self, x) -> list:
        h = self.head(x)
        taps = []
        for block in self.blocks:
            h = block(h)
            taps.append(h)
        return taps

    def forward(self, x):
        head = self.head(x)
        h = head
        for block in self.blocks:
            h = block(h)
        return ops.add(x, self.tail(ops.add(h, head)))
