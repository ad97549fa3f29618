"""Stage 2: frozen ViT with cascaded CTF/CTI adapters."""

from .adapter import Adapter, Ctf, Cti, WeightNet, ctf
from .network import Mfin, MfinOutput, MissingVitWeightsError, mfin_forward, tokenize_priors
from .pretrain import pretrain_vit, restoration_corpus
from .vit import RestorationHead, VitBackbone, VitBlock, grid_index, positional

__all__ = [
    "Adapter", "Ctf", "Cti", "Mfin", "MfinOutput", "MissingVitWeightsError", "RestorationHead",
    "VitBackbone", "VitBlock", "WeightNet", "ctf", "grid_index", "mfin_forward", "positional",
    "pretrain_vit", "restoration_corpus", "tokenize_priors",
]
