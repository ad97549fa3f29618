"""Differentiable operations over :class:`Tensor`.

Images are channels-last, ``(N, H, W, C)``; single images ``(H, W, C)`` are
accepted by the spatial ops and returned without the batch axis.  Token
sequences are ``(..., T, k)``.
"""

from __future__ import annotations

import math
from functools import lru_cache
from numbers import Number

import numpy as np
from scipy import special

from .tensor import Tensor, as_tensor, make_result


def unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape``, undoing numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a = as_tensor(a)
    if isinstance(b, Number):
        return make_result(a.data + b, (a,), lambda g: (g,))
    b = as_tensor(b)
    return make_result(
        a.data + b.data, (a, b), lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape))
    )


def sub(a, b) -> Tensor:
    if isinstance(b, Number):
        return add(a, -b)
    if isinstance(a, Number):
        return add(mul(b, -1.0), a)
    a, b = as_tensor(a), as_tensor(b)
    return make_result(
        a.data - b.data, (a, b), lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape))
    )


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    if isinstance(b, Number):
        return make_result(a.data * b, (a,), lambda g: (g * b,))
    b = as_tensor(b)

    def backward(g):
        ga = unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return make_result(a.data * b.data, (a, b), backward)


def div(a, b) -> Tensor:
    if isinstance(b, Number):
        return mul(a, 1.0 / b)
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        ga = unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = unbroadcast(-g * a.data / (b.data * b.data), b.shape) if b.requires_grad else None
        return ga, gb

    return make_result(a.data / b.data, (a, b), backward)


def abs(x) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = as_tensor(x)
    return make_result(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return make_result(x.data * mask, (x,), lambda g: (g * mask,))


def gelu(x) -> Tensor:
    """Exact GELU, ``x * Phi(x)``."""
    x = as_tensor(x)
    cdf = special.ndtr(x.data)
    pdf = np.exp(-0.5 * x.data * x.data) / math.sqrt(2.0 * math.pi)
    return make_result(x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = special.expit(x.data)
    return make_result(y, (x,), lambda g: (g * y * (1.0 - y),))


def sine_act(x, w0: float = 30.0) -> Tensor:
    """``sin(w0 * x)``, the SIREN activation."""
    x = as_tensor(x)
    arg = w0 * x.data
    return make_result(np.sin(arg), (x,), lambda g: (g * w0 * np.cos(arg),))


# ---------------------------------------------------------------- reductions

def _norm_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    axes = _norm_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape),)

    return make_result(np.asarray(out), (x,), backward)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _norm_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return mul(sum(x, axis=axes, keepdims=keepdims), 1.0 / count)


def l1_loss(pred, target) -> Tensor:
    """Mean absolute error."""
    return mean(abs(sub(pred, target)))


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul needs operands of rank >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        if b.requires_grad:
            gb = unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return make_result(a.data @ b.data, (a, b), backward)


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias`` over the last axis; ``weight`` is ``(in, out)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    n_in, n_out = weight.shape
    if x.shape[-1] != n_in:
        raise ValueError(f"linear expects last dim {n_in}, got shape {x.shape}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, n_in)
    out = x2 @ weight.data
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents = (x, weight, bias)

    def backward(g):
        g2 = g.reshape(-1, n_out)
        gx = (g2 @ weight.data.T).reshape(x.shape) if x.requires_grad else None
        gw = x2.T @ g2 if weight.requires_grad else None
        if bias is None:
            return gx, gw
        gb = g2.sum(axis=0) if bias.requires_grad else None
        return gx, gw, gb

    return make_result(out.reshape(lead + (n_out,)), parents, backward)


# ---------------------------------------------------------------- shape ops

def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_result(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, slice, type(Ellipsis))) or i is None for i in items)


def getitem(x, index) -> Tensor:
    x = as_tensor(x)
    out = x.data[index]
    basic = _is_basic_index(index)

    def backward(g):
        gx = np.zeros_like(x.data)
        if basic:
            gx[index] += g
        else:
            np.add.at(gx, index, g)
        return (gx,)

    return make_result(np.array(out, copy=True), (x,), backward)


def gather(x, indices, axis: int) -> Tensor:
    """``np.take(x, indices, axis)`` with a scatter-add backward."""
    x = as_tensor(x)
    indices = np.asarray(indices)
    axis = axis % x.ndim
    out = np.take(x.data, indices, axis=axis)

    def backward(g):
        gx = np.zeros_like(x.data)
        # move the gathered axis first so a single add.at covers it
        gm = np.moveaxis(gx, axis, 0)
        gg = np.moveaxis(g, axis, 0)
        np.add.at(gm, indices, gg)
        return (gx,)

    return make_result(out, (x,), backward)


def concat(xs, axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    ndim = xs[0].ndim
    axis = axis % ndim
    for x in xs[1:]:
        if x.ndim != ndim or any(
            x.shape[d] != xs[0].shape[d] for d in range(ndim) if d != axis
        ):
            raise ValueError(f"concat extent mismatch: {[t.shape for t in xs]}")
    sizes = [x.shape[axis] for x in xs]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_result(np.concatenate([x.data for x in xs], axis=axis), tuple(xs), backward)


def concat_channels(xs) -> Tensor:
    """Concatenate images along the channel axis; spatial extents must agree."""
    xs = [as_tensor(x) for x in xs]
    spatial = {x.shape[:-1] for x in xs}
    if len(spatial) != 1:
        raise ValueError(f"concat_channels needs equal spatial extents, got {[x.shape for x in xs]}")
    return concat(xs, axis=-1)


def flatten_tokens(x) -> Tensor:
    """``(N, h, w, c) -> (N, h*w, c)`` in row-major pixel order."""
    x = as_tensor(x)
    n, h, w, c = x.shape
    return reshape(x, (n, h * w, c))


def patchify(x, patch: int) -> Tensor:
    """``(N, H, W, C) -> (N, (H/p)(W/p), p*p*C)``; tokens are row-major over patches."""
    x = as_tensor(x)
    n, hh, ww, c = x.shape
    if hh % patch or ww % patch:
        raise ValueError(f"extent {hh}x{ww} not divisible by patch {patch}")
    gh, gw = hh // patch, ww // patch
    y = reshape(x, (n, gh, patch, gw, patch, c))
    y = transpose(y, (0, 1, 3, 2, 4, 5))
    return reshape(y, (n, gh * gw, patch * patch * c))


def unpatchify(tokens, patch: int, grid_h: int, grid_w: int) -> Tensor:
    """Inverse of :func:`patchify`."""
    tokens = as_tensor(tokens)
    n, t, d = tokens.shape
    c = d // (patch * patch)
    if t != grid_h * grid_w or c * patch * patch != d:
        raise ValueError(f"cannot unpatchify tokens of shape {tokens.shape}")
    y = reshape(tokens, (n, grid_h, grid_w, patch, patch, c))
    y = transpose(y, (0, 1, 3, 2, 4, 5))
    return reshape(y, (n, grid_h * patch, grid_w * patch, c))


# ---------------------------------------------------------------- normalisation

def softmax_lastdim(x) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return make_result(y, (x,), backward)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    n = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        gx = None
        if x.requires_grad:
            gh = g * gain.data
            gx = (inv / n) * (
                n * gh - gh.sum(axis=-1, keepdims=True)
                - xhat * (gh * xhat).sum(axis=-1, keepdims=True)
            )
        lead = tuple(range(g.ndim - 1))
        ggain = (g * xhat).sum(axis=lead).reshape(gain.shape) if gain.requires_grad else None
        gbias = g.sum(axis=lead).reshape(bias.shape) if bias.requires_grad else None
        return gx, ggain, gbias

    return make_result(out, (x, gain, bias), backward)


# ---------------------------------------------------------------- spatial ops

def reflect_indices(n: int, before: int, after: int) -> np.ndarray:
    """Source indices for reflect padding (edge pixel not repeated)."""
    idx = np.arange(-before, n + after)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.abs(idx) % period
    return np.where(idx >= n, period - idx, idx)


def _pad_axis(a: np.ndarray, axis: int, before: int, after: int) -> np.ndarray:
    if before == 0 and after == 0:
        return a
    return np.take(a, reflect_indices(a.shape[axis], before, after), axis=axis)


def _fold_axis(g: np.ndarray, axis: int, n: int, before: int, after: int) -> np.ndarray:
    """Adjoint of :func:`_pad_axis`: accumulate padded gradient back onto sources."""
    if before == 0 and after == 0:
        return g
    idx = reflect_indices(n, before, after)
    gm = np.moveaxis(g, axis, 0)
    out_shape = (n,) + gm.shape[1:]
    out = np.zeros(out_shape, dtype=g.dtype)
    out += gm[before:before + n]
    for j in list(range(before)) + list(range(before + n, before + n + after)):
        out[idx[j]] += gm[j]
    return np.moveaxis(out, 0, axis)


def pad_reflect(x, ph: int, pw: int) -> Tensor:
    """Reflect-pad the two spatial axes of an ``(N, H, W, C)`` tensor."""
    x = as_tensor(x)
    padded = _pad_axis(_pad_axis(x.data, 1, ph, ph), 2, pw, pw)

    def backward(g):
        g = _fold_axis(g, 2, x.shape[2], pw, pw)
        return (_fold_axis(g, 1, x.shape[1], ph, ph),)

    return make_result(padded, (x,), backward)


def _batched(fn):
    """Let a ``(N, H, W, C)`` op accept a single ``(H, W, C)`` image."""

    def wrapper(x, *args, **kwargs):
        x = as_tensor(x)
        if x.ndim == 3:
            out = fn(reshape(x, (1,) + x.shape), *args, **kwargs)
            return reshape(out, out.shape[1:])
        if x.ndim != 4:
            raise ValueError(f"expected an image tensor of rank 3 or 4, got shape {x.shape}")
        return fn(x, *args, **kwargs)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_batched
def conv2d(x, kernel, bias=None) -> Tensor:
    """Stride-1 same-size correlation with reflect padding.

    ``kernel`` is ``(kh, kw, cin, cout)`` with odd extents.
    """
    kernel = as_tensor(kernel)
    kh, kw, cin, cout = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"conv2d needs odd kernel extents, got {kh}x{kw}")
    n, hh, ww, c = x.shape
    if c != cin:
        raise ValueError(f"conv2d expects {cin} input channels, got {c}")
    ph, pw = kh // 2, kw // 2
    xp = _pad_axis(_pad_axis(x.data, 1, ph, ph), 2, pw, pw)
    if kh == 1 and kw == 1:
        cols = xp.reshape(-1, cin)
    else:
        cols6 = np.empty((n, hh, ww, kh, kw, cin), dtype=np.result_type(x.data, kernel.data))
        for i in range(kh):
            for j in range(kw):
                cols6[:, :, :, i, j, :] = xp[:, i:i + hh, j:j + ww, :]
        cols = cols6.reshape(-1, kh * kw * cin)
    k2 = kernel.data.reshape(-1, cout)
    out = cols @ k2
    parents = (x, kernel)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents = (x, kernel, bias)

    def backward(g):
        g2 = g.reshape(-1, cout)
        gx = None
        if x.requires_grad:
            gcols = (g2 @ k2.T).reshape(n, hh, ww, kh, kw, cin)
            gxp = np.zeros(xp.shape, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, i:i + hh, j:j + ww, :] += gcols[:, :, :, i, j, :]
            gx = _fold_axis(_fold_axis(gxp, 2, ww, pw, pw), 1, hh, ph, ph)
        gk = (cols.T @ g2).reshape(kernel.shape) if kernel.requires_grad else None
        if bias is None:
            return gx, gk
        return gx, gk, (g2.sum(axis=0) if bias.requires_grad else None)

    return make_result(out.reshape(n, hh, ww, cout), parents, backward)


@_batched
def depthwise_conv2d(x, kernel, bias=None) -> Tensor:
    """Per-channel correlation; ``kernel`` is ``(kh, kw, C)``."""
    kernel = as_tensor(kernel)
    kh, kw, c = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"depthwise_conv2d needs odd kernel extents, got {kh}x{kw}")
    n, hh, ww, cx = x.shape
    if cx != c:
        raise ValueError(f"depthwise_conv2d expects {c} channels, got {cx}")
    ph, pw = kh // 2, kw // 2
    xp = _pad_axis(_pad_axis(x.data, 1, ph, ph), 2, pw, pw)
    out = np.zeros((n, hh, ww, c), dtype=np.result_type(x.data, kernel.data))
    for i in range(kh):
        for j in range(kw):
            out += xp[:, i:i + hh, j:j + ww, :] * kernel.data[i, j]
    parents = (x, kernel)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents = (x, kernel, bias)

    def backward(g):
        gx = gk = None
        if x.requires_grad:
            gxp = np.zeros(xp.shape, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, i:i + hh, j:j + ww, :] += g * kernel.data[i, j]
            gx = _fold_axis(_fold_axis(gxp, 2, ww, pw, pw), 1, hh, ph, ph)
        if kernel.requires_grad:
            gk = np.empty(kernel.shape, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    gk[i, j] = (g * xp[:, i:i + hh, j:j + ww, :]).sum(axis=(0, 1, 2))
        if bias is None:
            return gx, gk
        return gx, gk, (g.sum(axis=(0, 1, 2)) if bias.requires_grad else None)

    return make_result(out, parents, backward)


def cubic_kernel(t, a: float = -0.5):
    """Keys cubic convolution kernel."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    near = ((a + 2) * t - (a + 3)) * t * t + 1
    far = ((a * t - 5 * a) * t + 8 * a) * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


@lru_cache(maxsize=64)
def bicubic_matrix(n: int, factor: int) -> np.ndarray:
    """``(n*factor, n)`` interpolation matrix, half-pixel centres, reflect edges."""
    m = np.zeros((n * factor, n), dtype=np.float64)
    for i in range(n * factor):
        u = (i + 0.5) / factor - 0.5
        base = math.floor(u)
        t = u - base
        for off in (-1, 0, 1, 2):
            m[i, _reflect(base + off, n)] += float(cubic_kernel(t - off))
    m.setflags(write=False)
    return m


def _reflect(i: int, n: int) -> int:
    if n == 1:
        return 0
    period = 2 * (n - 1)
    i = -i if i < 0 else i
    i %= period
    return period - i if i >= n else i


@_batched
def upsample_bicubic(x, factor: int) -> Tensor:
    """Separable bicubic upsampling by an integer factor (a = -0.5)."""
    if factor < 1:
        raise ValueError("upsample factor must be >= 1")
    n, h, w, c = x.shape
    uy = bicubic_matrix(h, factor).astype(x.data.dtype)
    ux = bicubic_matrix(w, factor).astype(x.data.dtype)
    rows = np.moveaxis(np.tensordot(uy, x.data, axes=([1], [1])), 0, 1)      # N, fh, w, C
    out = np.moveaxis(np.tensordot(ux, rows, axes=([1], [2])), 0, 2)        # N, fh, fw, C

    def backward(g):
        g1 = np.moveaxis(np.tensordot(ux.T, g, axes=([1], [2])), 0, 2)      # N, fh, w, C
        return (np.moveaxis(np.tensordot(uy.T, g1, axes=([1], [1])), 0, 1),)

    return make_result(np.ascontiguousarray(out), (x,), backward)


# ---------------------------------------------------------------- attention

def multi_head_attention(q, kv, heads: int, wq, wk, wv, wo, bq=None, bk=None, bv=None, bo=None,
                         return_weights: bool = False):
    """Scaled dot-product attention of ``q`` (``..., Tq, k``) over ``kv`` (``..., Tkv, k``).

    Projection weights are ``(k, k)``; the caller's layer owns them.
    """
    q, kv = as_tensor(q), as_tensor(kv)
    dim = q.shape[-1]
    if dim % heads:
        raise ValueError(f"model dim {dim} not divisible by {heads} heads")
    if kv.shape[-1] != dim:
        raise ValueError(f"query dim {dim} != key/value dim {kv.shape[-1]}")
    hd = dim // heads
    tq, tk = q.shape[-2], kv.shape[-2]
    lead_q, lead_k = q.shape[:-2], kv.shape[:-2]

    def split(t, lead, length):
        t = reshape(t, lead + (length, heads, hd))
        nl = len(lead)
        return transpose(t, tuple(range(nl)) + (nl + 1, nl, nl + 2))

    qh = split(linear(q, wq, bq), lead_q, tq)
    kh = split(linear(kv, wk, bk), lead_k, tk)
    vh = split(linear(kv, wv, bv), lead_k, tk)
    nl = len(lead_k)
    kt = transpose(kh, tuple(range(nl)) + (nl, nl + 2, nl + 1))
    scores = mul(matmul(qh, kt), 1.0 / math.sqrt(hd))
    weights = softmax_lastdim(scores)
    ctx = matmul(weights, vh)
    nl = len(lead_q)
    ctx = transpose(ctx, tuple(range(nl)) + (nl + 1, nl, nl + 2))
    ctx = reshape(ctx, lead_q + (tq, dim))
    out = linear(ctx, wo, bo)
    if return_weights:
        return out, weights
    return out
