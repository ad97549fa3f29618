"""Minimal deterministic tensor algebra with reverse-mode differentiation."""

from . import ops
from .gradcheck import grad_check
from .nn import (
    Conv2d,
    DepthwiseConv2d,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    Parameter,
    SineLayer,
    count_parameters,
)
from .pstf import read_tensor, write_tensor
from .tensor import (
    Tape,
    Tensor,
    backward,
    default_dtype,
    double_precision,
    no_grad,
    set_default_dtype,
)

__all__ = [
    "Conv2d", "DepthwiseConv2d", "LayerNorm", "Linear", "Module", "MultiHeadAttention",
    "Parameter", "SineLayer", "Tape", "Tensor", "backward", "count_parameters", "default_dtype",
    "double_precision", "grad_check", "no_grad", "ops", "read_tensor", "set_default_dtype",
    "write_tensor",
]
