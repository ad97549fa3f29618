"""Parameters, a minimal module system, and the layers used by the networks."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import ops
from .tensor import Tensor, default_dtype


class Parameter(Tensor):
    """A named tensor owned by a model; ``trainable`` mirrors ``requires_grad``."""

    def __init__(self, data, trainable: bool = True, name: str = ""):
        super().__init__(np.array(data, dtype=default_dtype()), requires_grad=trainable)
        self.name = name

    @property
    def trainable(self) -> bool:
        return self.requires_grad

    @trainable.setter
    def trainable(self, flag: bool) -> None:
        self.requires_grad = bool(flag)
        if not flag:
            self.grad = None

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape}, trainable={self.trainable})"


class Module:
    """Attribute-walking container; parameter paths follow attribute names."""

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            if attr.startswith("_"):
                continue
            yield from _walk(value, prefix + attr)

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def assign_names(self, prefix: str = "") -> None:
        """Stamp each parameter with its path; paths must be unique."""
        seen: dict[str, Parameter] = {}
        for name, p in self.named_parameters(prefix):
            if name in seen:
                raise ValueError(f"duplicate parameter name {name!r}")
            seen[name] = p
            p.name = name

    def freeze(self) -> "Module":
        for p in self.parameters():
            p.trainable = False
        return self

    def unfreeze(self) -> "Module":
        for p in self.parameters():
            p.trainable = True
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        params = dict(self.named_parameters())
        if strict:
            missing = sorted(set(params) - set(state))
            unexpected = sorted(set(state) - set(params))
            if missing or unexpected:
                raise KeyError(f"state mismatch; missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, p in params.items():
            if name not in state:
                continue
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ValueError(f"shape mismatch for {name}: {value.shape} vs {p.shape}")
            p.data = value.astype(p.data.dtype, copy=True)


def _walk(value, path: str):
    if isinstance(value, Parameter):
        yield path, value
    elif isinstance(value, Module):
        yield from value.named_parameters(path + ".")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(item, f"{path}.{i}")


def fan_in_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    """Affine map over the last axis; weight stored as ``(in, out)``."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, bias: bool = True,
                 zero_init: bool = False):
        if zero_init:
            w = np.zeros((n_in, n_out))
        else:
            w = fan_in_uniform(rng, (n_in, n_out), n_in)
        self.weight = Parameter(w)
        self.bias = None
        if bias:
            b = np.zeros(n_out) if zero_init else fan_in_uniform(rng, (n_out,), n_in)
            self.bias = Parameter(b)

    def forward(self, x):
        return ops.linear(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator,
                 bias: bool = True):
        fan_in = c_in * kernel * kernel
        self.weight = Parameter(fan_in_uniform(rng, (kernel, kernel, c_in, c_out), fan_in))
        self.bias = Parameter(fan_in_uniform(rng, (c_out,), fan_in)) if bias else None

    def forward(self, x):
        return ops.conv2d(x, self.weight, self.bias)


class DepthwiseConv2d(Module):
    def __init__(self, channels: int, kernel: int, rng: np.random.Generator, bias: bool = True):
        fan_in = kernel * kernel
        self.weight = Parameter(fan_in_uniform(rng, (kernel, kernel, channels), fan_in))
        self.bias = Parameter(fan_in_uniform(rng, (channels,), fan_in)) if bias else None

    def forward(self, x):
        return ops.depthwise_conv2d(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gain = Parameter(np.ones(dim))
        self.bias = Parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x):
        return ops.layer_norm(x, self.gain, self.bias, self.eps)


class MultiHeadAttention(Module):
    """Learned Q/K/V/output projections around :func:`ops.multi_head_attention`."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if dim % heads:
            raise ValueError(f"dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.q = Linear(dim, dim, rng)
        self.k = Linear(dim, dim, rng)
        self.v = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)

    def forward(self, query, kv, return_weights: bool = False):
        return ops.multi_head_attention(
            query, kv, self.heads,
            self.q.weight, self.k.weight, self.v.weight, self.out.weight,
            self.q.bias, self.k.bias, self.v.bias, self.out.bias,
            return_weights=return_weights,
        )


class SineLayer(Module):
    """Linear map followed by ``sin(w0 * .)`` with SIREN initialisation."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, w0: float = 30.0,
                 first: bool = False):
        bound = 1.0 / n_in if first else math.sqrt(6.0 / n_in) / w0
        self.w0 = w0
        self.linear = Linear(n_in, n_out, rng)
        self.linear.weight.data = rng.uniform(-bound, bound, size=(n_in, n_out)).astype(default_dtype())

    def forward(self, x):
        return ops.sine_act(self.linear(x), self.w0)


def count_parameters(module: Module) -> tuple[int, int]:
    """(total, trainable) scalar counts."""
    total = trainable = 0
    for p in module.parameters():
        total += p.size
        if p.trainable:
            trainable += p.size
    return total, trainable
