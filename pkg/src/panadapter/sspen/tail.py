"""Decoding heads that turn the two priors into a residual image."""

from __future__ import annotations

import numpy as np

from ..gradcore import Conv2d, Linear, Module, SineLayer, Tensor, ops


def coord_grid(n: int) -> np.ndarray:
    """Cell-centre coordinates of an ``n``-cell lattice on ``[-1, 1]``."""
    return -1.0 + (2.0 * np.arange(n) + 1.0) / n


def nearest_cells(coords: np.ndarray, n_feat: int) -> tuple[np.ndarray, np.ndarray]:
    """Nearest feature cell per coordinate, and the offset scaled to ``[-0.5, 0.5]``."""
    idx = np.clip(np.floor((coords + 1.0) * 0.5 * n_feat).astype(np.int64), 0, n_feat - 1)
    rel = (coords - coord_grid(n_feat)[idx]) * n_feat / 2.0
    return idx, rel


def _sample(feat, out_h: int, out_w: int):
    """Gather nearest feature vectors for every output cell -> ``(N, P, m)`` and offsets ``(P, 2)``."""
    n, fh, fw, m = feat.shape
    iy, ry = nearest_cells(coord_grid(out_h), fh)
    ix, rx = nearest_cells(coord_grid(out_w), fw)
    rel = np.stack(np.broadcast_arrays(ry[:, None], rx[None, :]), axis=-1).reshape(-1, 2)
    flat = ops.reshape(feat, (n, fh * fw, m))
    if fh == out_h and fw == out_w:
        return flat, rel
    index = (iy[:, None] * fw + ix[None, :]).reshape(-1)
    return ops.gather(flat, index, axis=1), rel


class InrTail(Module):
    """LIIF-style decoder: nearest-feature sampling from both priors plus a SIREN MLP.

    The MLP input per output pixel is ``[a, b, offset_a, offset_b]``; all but
    the last layer are sine layers (first-layer frequency ``w0``).  The
    output layer is zero-initialised.
    """

    def __init__(self, dim_a: int, dim_b: int, out_ch: int, rng: np.random.Generator,
                 hidden: int = 64, layers: int = 4, w0: float = 30.0):
        if layers < 2:
            raise ValueError("INR needs at least two layers")
        n_in = dim_a + dim_b + 4
        self.sine = [SineLayer(n_in, hidden, rng, w0=w0, first=True)]
        self.sine += [SineLayer(hidden, hidden, rng, w0=w0) for _ in range(layers - 2)]
        # zero output layer: the tail starts as an exact no-op on the residual
        self.out = Linear(hidden, out_ch, rng, zero_init=True)

    def forward(self, a, b, out_h: int, out_w: int):
        fa, rel_a = _sample(a, out_h, out_w)
        fb, rel_b = _sample(b, out_h, out_w)
        n = a.shape[0]
        rel = np.concatenate([rel_a, rel_b], axis=-1)
        rel = Tensor(np.broadcast_to(rel, (n,) + rel.shape), dtype=fa.dtype)
        h = ops.concat([fa, fb, rel], axis=-1)
        for layer in self.sine:
            h = layer(h)
        out = self.out(h)
        return ops.reshape(out, (n, out_h, out_w, out.shape[-1]))


class ConvTail(Module):
    """Three 3x3 convs over ``[bicubic(A), B]``; the non-INR ablation head."""

    def __init__(self, dim_a: int, dim_b: int, out_ch: int, rng: np.random.Generator,
                 hidden: int = 32):
        self.conv1 = Conv2d(dim_a + dim_b, hidden, 3, rng)
        self.conv2 = Conv2d(hidden, hidden, 3, rng)
        self.conv3 = Conv2d(hidden, out_ch, 3, rng)

    def forward(self, a, b, out_h: int, out_w: int):
        factor = out_h // a.shape[1]
        up_a = ops.upsample_bicubic(a, factor)
        if b.shape[1] != out_h:
            b = ops.upsample_bicubic(b, out_h // b.shape[1])
        h = ops.relu(self.conv1(ops.concat_channels([up_a, b])))
        h = ops.relu(self.conv2(h))
        return self.conv3(h)


def make_tail(kind: str, dim_a: int, dim_b: int, out_ch: int, rng: np.random.Generator,
              hidden: int = 64, layers: int = 4, w0: float = 30.0) -> Module:
    if kind == "inr":
        return InrTail(dim_a, dim_b, out_ch, rng, hidden=hidden, layers=layers, w0=w0)
    if kind == "conv":
        return ConvTail(dim_a, dim_b, out_ch, rng, hidden=max(8, hidden // 2))
    raise ValueError(f"unknown tail kind {kind!r}")
