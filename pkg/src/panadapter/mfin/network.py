"""Stage 2: frozen ViT plus cascaded adapters fed by the stage-1 priors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..gradcore import Linear, Module, Parameter, Tensor, ops
from ..gradcore.tensor import as_tensor
from ..sspen.tail import make_tail
from .adapter import Adapter
from .vit import VitBackbone, positional

PATCH = 4


@dataclass
class MfinOutput:
    A_hat: Tensor
    B_hat: Tensor
    O2: Tensor
    stream: list = field(default_factory=list)


class Mfin(Module):
    """``depth / interval`` adapters tapped after every ``interval`` ViT blocks.

    Branch tokens are mapped back to prior space through zero-initialised
    projections added to the incoming priors, so ``A_hat == A`` and
    ``B_hat == B`` at initialisation.
    """

    def __init__(self, bands: int, prior_dim: int, rng: np.random.Generator, vit_dim: int = 64,
                 depth: int = 8, heads: int = 4, mlp_ratio: int = 2, adapter_dim: int = 32,
                 interval: int = 4, pos_grid: int = 16, tail: str = "inr", inr_hidden: int = 64,
                 inr_layers: int = 4, w0: float = 30.0, use_ctf: bool = True,
                 use_cti: bool = True, tail_residual: bool = True):
        if interval < 1 or depth % interval:
            raise ValueError(f"interval t={interval} must divide depth L={depth}")
        if adapter_dim > vit_dim:
            raise ValueError(f"adapter dim k={adapter_dim} exceeds ViT dim D={vit_dim}")
        self.interval = interval
        self.use_ctf = use_ctf
        self.use_cti = use_cti
        self.tail_residual = tail_residual
        self.vit = VitBackbone(bands + 1, rng, dim=vit_dim, depth=depth, heads=heads,
                               mlp_ratio=mlp_ratio, patch=PATCH, pos_grid=pos_grid)
        self.tok_a = Linear(prior_dim, adapter_dim, rng)
        self.pos_a = Parameter(np.zeros((pos_grid * pos_grid, adapter_dim)))
        self.tok_b = Linear(PATCH * PATCH * prior_dim, adapter_dim, rng)
        self.adapters = [Adapter(vit_dim, adapter_dim, heads, rng)
                         for _ in range(depth // interval)]
        self.untok_a = Linear(adapter_dim, prior_dim, rng, zero_init=True)
        self.untok_b = Linear(adapter_dim, PATCH * PATCH * prior_dim, rng, zero_init=True)
        self.tail = make_tail(tail, prior_dim, prior_dim, bands, rng, hidden=inr_hidden,
                              layers=inr_layers, w0=w0)
        self._pretrained = False

    @property
    def pretrained(self) -> bool:
        return self._pretrained

    def mark_pretrained(self) -> None:
        self._pretrained = True

    def tokenize_priors(self, a, b):
        a, b = as_tensor(a), as_tensor(b)
        n, h, w, _ = a.shape
        if b.shape[1] != PATCH * h or b.shape[2] != PATCH * w:
            raise ValueError(f"spatial prior {b.shape} is not {PATCH}x spectral prior {a.shape}")
        f_spe = ops.add(self.tok_a(ops.flatten_tokens(a)), positional(self.pos_a, h, w))
        f_spa = self.tok_b(ops.patchify(b, PATCH))
        if f_spe.shape[1] != f_spa.shape[1]:
            raise ValueError("spectral and spatial token counts differ")
        return f_spe, f_spa

    def forward(self, a, b, q, m_up=None, return_stream: bool = False) -> MfinOutput:
        a, b, q = as_tensor(a), as_tensor(b), as_tensor(q)
        n, h, w, m = a.shape
        f_spe, f_spa = self.tokenize_priors(a, b)
        x = self.vit.embed_tokens(q)
        if x.shape[1] != f_spe.shape[1]:
            raise ValueError(f"ViT tokens {x.shape[1]} != branch tokens {f_spe.shape[1]}")
        stream = []
        for j, adapter in enumerate(self.adapters):
            for block in self.vit.blocks[j * self.interval:(j + 1) * self.interval]:
                x = block(x)
                stream.append(x)
            f_spe, f_spa, x = adapter(f_spe, f_spa, x, self.use_ctf, self.use_cti)
        a_hat = ops.add(a, ops.reshape(self.untok_a(f_spe), (n, h, w, m)))
        b_hat = ops.add(b, ops.unpatchify(self.untok_b(f_spa), PATCH, h, w))
        _, hh, ww, _ = b.shape
        o2 = self.tail(a_hat, b_hat, hh, ww)
        if self.tail_residual:
            if m_up is None:
                raise ValueError("tail residual needs the upsampled LRMS")
            o2 = ops.add(o2, m_up)
        return MfinOutput(A_hat=a_hat, B_hat=b_hat, O2=o2, stream=stream if return_stream else [])


class MissingVitWeightsError(RuntimeError):
    pass


def mfin_forward(model: Mfin, a, b, q, m_up=None, return_stream: bool = False) -> MfinOutput:
    if not model.pretrained:
        raise MissingVitWeightsError("ViT backbone has no pretrained weights loaded")
    return model(a, b, q, m_up, return_stream=return_stream)


def tokenize_priors(model: Mfin, a, b):
    return model.tokenize_priors(a, b)
