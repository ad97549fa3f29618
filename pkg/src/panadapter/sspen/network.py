"""Stage-1 spatial-spectral prior extraction network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..gradcore import Module, Tensor, ops
from ..gradcore.tensor import as_tensor
from ..waldsim.degrade import RATIO
from .lpe import PriorBranch
from .tail import make_tail


class MissingWeightsError(RuntimeError):
    pass


@dataclass
class SspenOutput:
    A: Tensor   # (N, h, w, m) spectral prior
    B: Tensor   # (N, H, W, m) spatial prior
    O1: Tensor  # (N, H, W, s)
    m_up: Tensor | None = None


def _batch(x) -> Tensor:
    x = as_tensor(x)
    return ops.reshape(x, (1,) + x.shape) if x.ndim == 3 else x


def make_q(m_img, pan, ratio: int = RATIO) -> tuple[Tensor, Tensor]:
    """``Q = concat(bicubic(M, ratio), P)``; returns ``(Q, M_up)``.

    Accepts single images or batches; batched outputs either way.
    """
    m_img, pan = _batch(m_img), _batch(pan)
    if pan.shape[1] != ratio * m_img.shape[1] or pan.shape[2] != ratio * m_img.shape[2]:
        raise ValueError(f"PAN {pan.shape} is not {ratio}x LRMS {m_img.shape}")
    m_up = ops.upsample_bicubic(m_img, ratio)
    return ops.concat_channels([m_up, pan]), m_up


class Sspen(Module):
    """Two frozen EDSR branches with trainable LPE taps, plus Tail 1.

    The spectral branch sees the LRMS image at its native scale, the spatial
    branch sees ``Q`` at PAN scale.
    """

    def __init__(self, bands: int, rng: np.random.Generator, channels: int = 32,
                 n_blocks: int = 8, lpe_dim: int = 8, prior_dim: int = 32, tail: str = "inr",
                 inr_hidden: int = 64, inr_layers: int = 4, w0: float = 30.0):
        self.bands = bands
        self.spe = PriorBranch(bands, channels, n_blocks, lpe_dim, prior_dim, rng)
        self.spa = PriorBranch(bands + 1, channels, n_blocks, lpe_dim, prior_dim, rng)
        self.tail = make_tail(tail, prior_dim, prior_dim, bands, rng,
                              hidden=inr_hidden, layers=inr_layers, w0=w0)
        self._pretrained = False

    @property
    def pretrained(self) -> bool:
        return self._pretrained

    def mark_pretrained(self) -> None:
        self._pretrained = True

    def backbones(self) -> list[Module]:
        return [self.spe.backbone, self.spa.backbone]

    def taps(self, m_img, q) -> tuple[list, list]:
        return self.spe.taps(m_img), self.spa.taps(q)

    def from_taps(self, taps_spe, taps_spa, m_up) -> SspenOutput:
        a = self.spe.prior_from_taps(taps_spe)
        b = self.spa.prior_from_taps(taps_spa)
        _, hh, ww, _ = m_up.shape
        o1 = ops.add(self.tail(a, b, hh, ww), m_up)
        return SspenOutput(A=a, B=b, O1=o1, m_up=m_up)

    def forward(self, m_img, pan) -> SspenOutput:
        m_img = _batch(m_img)
        q, m_up = make_q(m_img, pan)
        taps_spe, taps_spa = self.taps(m_img, q)
        return self.from_taps(taps_spe, taps_spa, m_up)


def sspen_forward(model: Sspen, m_img, pan) -> SspenOutput:
    """Stage-1 forward; refuses to run on backbones that were never pretrained/loaded."""
    if not model.pretrained:
        raise MissingWeightsError("SSPEN backbones have no pretrained weights loaded")
    return model(m_img, pan)


def inr_decode(tail: Module, a, b, out_h: int, out_w: int) -> Tensor:
    return tail(_batch(a), _batch(b), out_h, out_w)
