"""Cascaded dual-branch adapter: two token fusioners and one token injector."""

from __future__ import annotations

import numpy as np

from ..gradcore import LayerNorm, Linear, Module, MultiHeadAttention, Parameter, ops


def _check_tokens(*xs) -> None:
    counts = {x.shape[-2] for x in xs}
    if len(counts) != 1:
        raise ValueError(f"token count mismatch: {[x.shape for x in xs]}")


class WeightNet(Module):
    """Per-token gate in (0, 1): linear k->k/4, GELU, linear k/4->k, sigmoid."""

    def __init__(self, dim: int, rng: np.random.Generator):
        hidden = max(1, dim // 4)
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def forward(self, x):
        return ops.sigmoid(self.fc2(ops.gelu(self.fc1(x))))


class Ctf(Module):
    """Gate the main branch by the other, cross-attend from ViT tokens, bottleneck FFN."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        self.gate = WeightNet(dim, rng)
        self.norm_q = LayerNorm(dim)
        self.norm_kv = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.norm_ffn = LayerNorm(dim)
        hidden = max(1, dim // 4)
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def forward(self, main, other, f_vit):
        _check_tokens(main, other, f_vit)
        fused = ops.add(ops.mul(main, self.gate(other)), main)
        h = ops.add(self.attn(self.norm_q(f_vit), self.norm_kv(fused)), fused)
        return ops.add(h, self.fc2(ops.gelu(self.fc1(self.norm_ffn(h)))))


def ctf(module: Ctf, f_spe, f_spa, f_vit, branch: str):
    """Branch ``spa`` refines ``f_spa`` gated by ``f_spe``; ``spe`` the reverse."""
    if branch == "spa":
        return module(f_spa, f_spe, f_vit)
    if branch == "spe":
        return module(f_spe, f_spa, f_vit)
    raise ValueError(f"branch must be 'spe' or 'spa', got {branch!r}")


class Cti(Module):
    """Fused branch tokens query the ViT tokens; output gated by ``s`` (zero at init)."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        self.fuse = Linear(2 * dim, dim, rng)
        self.norm_q = LayerNorm(dim)
        self.norm_kv = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.scale = Parameter(np.zeros(1))

    def forward(self, f_spe, f_spa, f_vit):
        _check_tokens(f_spe, f_spa, f_vit)
        fus = self.fuse(ops.concat([f_spa, f_spe], axis=-1))
        att = self.attn(self.norm_q(fus), self.norm_kv(f_vit))
        return ops.add(ops.mul(att, self.scale), f_vit)


class Adapter(Module):
    """One cascade step; ``down``/``up`` cross the ViT width D and adapter width k.

    ``up`` is zero-initialised so the first injection leaves the ViT stream
    untouched.
    """

    def __init__(self, vit_dim: int, dim: int, heads: int, rng: np.random.Generator):
        self.down = Linear(vit_dim, dim, rng)
        self.ctf_spe = Ctf(dim, heads, rng)
        self.ctf_spa = Ctf(dim, heads, rng)
        self.cti = Cti(dim, heads, rng)
        self.up = Linear(dim, vit_dim, rng, zero_init=True)

    def forward(self, f_spe, f_spa, x_vit, use_ctf: bool = True, use_cti: bool = True):
        """Returns ``(next_spe, next_spa, x_vit_after_injection)``."""
        f_vit = self.down(x_vit)
        if use_ctf:
            nxt_spe = self.ctf_spe(f_spe, f_spa, f_vit)
            nxt_spa = self.ctf_spa(f_spa, f_spe, f_vit)
        else:
            nxt_spe, nxt_spa = f_spe, f_spa
        if use_cti:
            injected = self.cti(nxt_spe, nxt_spa, f_vit)
            x_vit = ops.add(x_vit, self.up(injected))
        return nxt_spe, nxt_spa, x_vit
