"""Full two-stage model assembly and the per-stage freeze rules."""

from __future__ import annotations

import numpy as np

from ..gradcore import Module
from ..mfin import Mfin
from ..sspen import Sspen
from .config import RunConfig

BACKBONE_PREFIXES = ("sspen.spe.backbone.", "sspen.spa.backbone.", "mfin.vit.")


class PanAdapter(Module):
    def __init__(self, cfg: RunConfig):
        tail = "conv" if cfg.replace_inr else "inr"
        self.sspen = Sspen(cfg.bands, _rng(cfg, 1), channels=cfg.channels, n_blocks=cfg.n_blocks,
                           lpe_dim=cfg.lpe_dim, prior_dim=cfg.prior_dim, tail=tail,
                           inr_hidden=cfg.inr_hidden, inr_layers=cfg.inr_layers, w0=cfg.w0)
        self.mfin = Mfin(cfg.bands, cfg.prior_dim, _rng(cfg, 2), vit_dim=cfg.vit_dim,
                         depth=cfg.vit_depth, heads=cfg.heads, mlp_ratio=cfg.mlp_ratio,
                         adapter_dim=cfg.adapter_dim, interval=cfg.interval,
                         pos_grid=cfg.lrms_size, tail=tail, inr_hidden=cfg.inr_hidden,
                         inr_layers=cfg.inr_layers, w0=cfg.w0, use_ctf=not cfg.no_ctf,
                         use_cti=not cfg.no_cti, tail_residual=not cfg.no_tail2_residual)
        self.assign_names()


def _rng(cfg: RunConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, stream]))


def is_backbone(name: str) -> bool:
    return name.startswith(BACKBONE_PREFIXES)


def configure_stage(model: PanAdapter, stage: int, single_stage: bool = False) -> None:
    """Set ``trainable`` flags for training ``stage`` (1 or 2)."""
    model.freeze()
    if stage == 1:
        for name, p in model.sspen.named_parameters("sspen."):
            p.trainable = not is_backbone(name)
    elif stage == 2:
        for name, p in model.mfin.named_parameters("mfin."):
            p.trainable = not is_backbone(name)
        if single_stage:
            # stage-2 graph from scratch: the LPE taps and projections learn too
            for block in list(model.sspen.spe.lpe) + list(model.sspen.spa.lpe):
                block.unfreeze()
            model.sspen.spe.proj.unfreeze()
            model.sspen.spa.proj.unfreeze()
    else:
        raise ValueError(f"stage must be 1 or 2, got {stage}")
