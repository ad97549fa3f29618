"""Stage 1: frozen EDSR branches with LPE taps and the INR tail."""

from .edsr import EdsrBackbone, ResBlock
from .lpe import LpeBlock, PriorBranch
from .network import MissingWeightsError, Sspen, SspenOutput, inr_decode, make_q, sspen_forward
from .pretrain import pretrain_edsr, sr_corpus, train_restoration
from .tail import ConvTail, InrTail, coord_grid, make_tail, nearest_cells

__all__ = [
    "ConvTail", "EdsrBackbone", "InrTail", "LpeBlock", "MissingWeightsError",
    "PriorBranch", "ResBlock", "Sspen", "SspenOutput", "coord_grid", "inr_decode", "make_q",
    "make_tail", "nearest_cells", "pretrain_edsr", "sr_corpus", "sspen_forward",
    "train_restoration",
]
