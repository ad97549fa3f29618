"""Pre-norm ViT over 4x4 patches of ``Q``."""

from __future__ import annotations

import numpy as np

from ..gradcore import LayerNorm, Linear, Module, MultiHeadAttention, Parameter, Tensor, ops
from ..gradcore.tensor import as_tensor


def grid_index(gh: int, gw: int, table: int) -> np.ndarray:
    """Flat nearest-cell indices into a ``table x table`` embedding grid for a ``gh x gw`` grid."""
    rows = (np.arange(gh) * table) // gh
    cols = (np.arange(gw) * table) // gw
    return (rows[:, None] * table + cols[None, :]).reshape(-1)


def positional(table: Parameter, gh: int, gw: int):
    """Positional rows for a ``gh x gw`` token grid; identity lookup at the native size."""
    side = int(round(np.sqrt(table.shape[0])))
    if gh == side and gw == side:
        return table
    return ops.gather(table, grid_index(gh, gw, side), axis=0)


class VitBlock(Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: int, rng: np.random.Generator):
        self.norm1 = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.norm2 = LayerNorm(dim)
        self.fc1 = Linear(dim, dim * mlp_ratio, rng)
        self.fc2 = Linear(dim * mlp_ratio, dim, rng)

    def forward(self, x):
        h = self.norm1(x)
        x = ops.add(x, self.attn(h, h))
        return ops.add(x, self.fc2(ops.gelu(self.fc1(self.norm2(x)))))


class VitBackbone(Module):
    """Patch embedding, learned positional table, ``depth`` pre-norm blocks.

    The positional table covers a ``pos_grid x pos_grid`` token grid; other
    grids read it by nearest cell.
    """

    def __init__(self, in_ch: int, rng: np.random.Generator, dim: int = 64, depth: int = 8,
                 heads: int = 4, mlp_ratio: int = 2, patch: int = 4, pos_grid: int = 16):
        self.in_ch = in_ch
        self.patch = patch
        self.dim = dim
        self.embed = Linear(patch * patch * in_ch, dim, rng)
        self.pos = Parameter(rng.normal(0.0, 0.02, size=(pos_grid * pos_grid, dim)))
        self.blocks = [VitBlock(dim, heads, mlp_ratio, rng) for _ in range(depth)]

    @property
    def depth(self) -> int:
        return len(self.blocks)

    def embed_tokens(self, q):
        q = as_tensor(q)
        _, hh, ww, _ = q.shape
        gh, gw = hh // self.patch, ww // self.patch
        x = self.embed(ops.patchify(q, self.patch))
        return ops.add(x, positional(self.pos, gh, gw))

    def stream(self, q) -> list:
        """Token sequence after every block, starting from the embedding."""
        x = self.embed_tokens(q)
        out = []
        for block in self.blocks:
            x = block(x)
            out.append(x)
        return out

    def forward(self, q):
        return self.stream(q)[-1]


class RestorationHead(Module):
    """Pretraining-only decoder: tokens back to ``Q``-shaped residual."""

    def __init__(self, vit: VitBackbone, rng: np.random.Generator):
        self.vit = vit
        self.proj = Linear(vit.dim, vit.patch * vit.patch * vit.in_ch, rng)

    def forward(self, q):
        q = q if isinstance(q, Tensor) else Tensor(q)
        _, hh, ww, _ = q.shape
        p = self.vit.patch
        res = ops.unpatchify(self.proj(self.vit(q)), p, hh // p, ww // p)
        return ops.add(q, res)
