"""Reduced- and full-resolution quality indices on ``(H, W, bands)`` float arrays.

Everything is computed in float64.  Windowed indices tile the image with
``window``-sized blocks at the given ``stride`` (``stride == window`` is the
non-overlapping block mode, ``stride=1`` the sliding mode).
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from ..waldsim.degrade import DEFAULT_SIGMA, RATIO, degrade


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if x.ndim == 2:
        x, y = x[..., None], y[..., None]
    return x, y


def psnr(x, y, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB over all bands; ``inf`` when the images match."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    x, y = _pair(x, y)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def sam(x, y) -> float:
    """Mean spectral angle in degrees; pixels where either vector is zero count as 0."""
    x, y = _pair(x, y)
    if x.shape[-1] < 2:
        raise ValueError("SAM needs at least two bands")
    nx = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    ny = np.sqrt(np.sum(y * y, axis=-1, keepdims=True))
    valid = (nx[..., 0] > 0) & (ny[..., 0] > 0)
    ux = np.divide(x, nx, out=np.zeros_like(x), where=nx > 0)
    uy = np.divide(y, ny, out=np.zeros_like(y), where=ny > 0)
    # half-angle form stays exact for identical vectors, unlike arccos near 1
    diff = np.sqrt(np.sum((ux - uy) ** 2, axis=-1))
    summ = np.sqrt(np.sum((ux + uy) ** 2, axis=-1))
    angle = np.where(valid, 2.0 * np.arctan2(diff, summ), 0.0)
    return float(np.degrees(np.mean(angle)))


def ergas(x, y, ratio: int = RATIO) -> float:
    """ERGAS of estimate ``x`` against reference ``y``; zero-mean reference bands are skipped."""
    x, y = _pair(x, y)
    rmse = np.sqrt(np.mean((x - y) ** 2, axis=(0, 1)))
    mu = np.mean(y, axis=(0, 1))
    keep = mu != 0
    if not np.any(keep):
        raise ValueError("every reference band has zero mean")
    if not np.all(keep):
        warnings.warn(f"ERGAS skips {int(np.sum(~keep))} zero-mean band(s)", RuntimeWarning,
                      stacklevel=2)
    return float(100.0 / ratio * np.sqrt(np.mean((rmse[keep] / mu[keep]) ** 2)))


def window_starts(n: int, window: int, stride: int) -> range:
    if window > n:
        raise ValueError(f"window {window} larger than image extent {n}")
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be positive")
    return range(0, n - window + 1, stride)


def _blocks(img: np.ndarray, window: int, stride: int) -> np.ndarray:
    """``(H, W, ...) -> (n_windows, window*window, ...)``."""
    rows = window_starts(img.shape[0], window, stride)
    cols = window_starts(img.shape[1], window, stride)
    tiles = [img[r:r + window, c:c + window].reshape((window * window,) + img.shape[2:])
             for r in rows for c in cols]
    return np.stack(tiles)


def _uiqi_stats(mx, my, vx, vy, cxy) -> np.ndarray:
    """Product-form index per window with a guard for zero denominators.

    Zero-variance windows keep only the luminance factor (1 when the means are
    equal); all-zero windows score 1 when both are all-zero.
    """
    lum_den = mx * mx + my * my
    var_den = vx + vy
    q = np.empty_like(mx)
    regular = (lum_den > 0) & (var_den > 0)
    q[regular] = 4.0 * cxy[regular] * mx[regular] * my[regular] / (
        lum_den[regular] * var_den[regular])
    flat = (lum_den > 0) & ~(var_den > 0)
    q[flat] = 2.0 * mx[flat] * my[flat] / lum_den[flat]
    dark = ~(lum_den > 0)
    q[dark] = np.where(var_den[dark] > 0, 0.0, 1.0)
    return q


def uiqi(x, y, window: int = 32, stride: int | None = None) -> float:
    """Universal image quality index of two single-band images, averaged over windows."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if x.ndim == 3:
        if x.shape[-1] != 1:
            raise ValueError("uiqi takes single-band images")
        x, y = x[..., 0], y[..., 0]
    bx = _blocks(x, window, stride or window)
    by = _blocks(y, window, stride or window)
    mx, my = bx.mean(axis=1), by.mean(axis=1)
    dx, dy = bx - mx[:, None], by - my[:, None]
    vx, vy = np.mean(dx * dx, axis=1), np.mean(dy * dy, axis=1)
    cxy = np.mean(dx * dy, axis=1)
    return float(np.mean(_uiqi_stats(mx, my, vx, vy, cxy)))


# ---------------------------------------------------------------- hypercomplex

def next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def cd_conj(a: np.ndarray) -> np.ndarray:
    out = -a
    out[..., 0] = a[..., 0]
    return out


def cd_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cayley-Dickson product over the last axis (length a power of two).

    ``(p, q)(r, s) = (pr - s*q, sp + qr*)`` with ``*`` the conjugate.
    """
    n = a.shape[-1]
    if n == 1:
        return a * b
    h = n // 2
    p, q = a[..., :h], a[..., h:]
    r, s = b[..., :h], b[..., h:]
    first = cd_mul(p, r) - cd_mul(cd_conj(s), q)
    second = cd_mul(s, p) + cd_mul(q, cd_conj(r))
    return np.concatenate([first, second], axis=-1)


def _pad_bands(img: np.ndarray) -> np.ndarray:
    n = img.shape[-1]
    target = next_pow2(n)
    if target == n:
        return img
    pad = np.zeros(img.shape[:-1] + (target - n,), dtype=img.dtype)
    return np.concatenate([img, pad], axis=-1)


def q2n(x, y, window: int = 32, stride: int | None = None) -> float:
    """Hypercomplex quality index: bands zero-padded to a power of two, windowed, moduli averaged.

    Per window, with ``z`` and ``z'`` the hypercomplex pixel values,
    ``Q = 4 |sigma_zz'| |mean z| |mean z'| / ((sigma_z^2 + sigma_z'^2)(|mean z|^2 + |mean z'|^2))``
    where ``sigma_zz' = E[z conj(z')] - mean(z) conj(mean(z'))``.
    """
    x, y = _pair(x, y)
    x, y = _pad_bands(x), _pad_bands(y)
    bx = _blocks(x, window, stride or window)
    by = _blocks(y, window, stride or window)
    mx, my = bx.mean(axis=1), by.mean(axis=1)
    dx, dy = bx - mx[:, None], by - my[:, None]
    # centred form of E[z conj(z')] - mean(z) conj(mean(z')); same value, less cancellation
    cross = cd_mul(dx, cd_conj(dy)).mean(axis=1)
    vx = np.mean(np.sum(dx * dx, axis=-1), axis=1)
    vy = np.mean(np.sum(dy * dy, axis=-1), axis=1)
    if x.shape[-1] == 1:
        # real case: keep signs so the index collapses to uiqi
        return float(np.mean(_uiqi_stats(mx[:, 0], my[:, 0], vx, vy, cross[:, 0])))
    abs_mx = np.sqrt(np.sum(mx * mx, axis=-1))
    abs_my = np.sqrt(np.sum(my * my, axis=-1))
    cxy = np.sqrt(np.sum(cross * cross, axis=-1))
    return float(np.mean(_uiqi_stats(abs_mx, abs_my, vx, vy, cxy)))


# ---------------------------------------------------------------- no-reference

def d_lambda(ms_hat, ms, p: float = 1.0, window: int = 32, ratio: int = RATIO,
             stride: int | None = None) -> float:
    """Spectral distortion between inter-band UIQIs at PAN scale and at LRMS scale."""
    ms_hat = np.asarray(ms_hat, dtype=np.float64)
    ms = np.asarray(ms, dtype=np.float64)
    n = ms.shape[-1]
    if ms_hat.shape[-1] != n:
        raise ValueError(f"band mismatch {ms_hat.shape[-1]} vs {n}")
    if n < 2:
        return 0.0
    w_lr = max(1, window // ratio)
    s_lr = max(1, (stride or window) // ratio)
    total = 0.0
    for l in range(n):
        for r in range(n):
            if l == r:
                continue
            hi = uiqi(ms_hat[..., l], ms_hat[..., r], window, stride)
            lo = uiqi(ms[..., l], ms[..., r], w_lr, s_lr)
            total += abs(hi - lo) ** p
    return float((total / (n * (n - 1))) ** (1.0 / p))


def d_s(ms_hat, pan, ms, pan_lr=None, q: float = 1.0, window: int = 32, ratio: int = RATIO,
        stride: int | None = None, sigma: float = DEFAULT_SIGMA) -> float:
    """Spatial distortion; ``pan_lr`` defaults to ``degrade(pan)``."""
    ms_hat = np.asarray(ms_hat, dtype=np.float64)
    ms = np.asarray(ms, dtype=np.float64)
    pan = np.asarray(pan, dtype=np.float64).reshape(ms_hat.shape[:2])
    if ms_hat.shape[-1] != ms.shape[-1]:
        raise ValueError(f"band mismatch {ms_hat.shape[-1]} vs {ms.shape[-1]}")
    if pan_lr is None:
        pan_lr = degrade(pan, sigma, ratio)
    pan_lr = np.asarray(pan_lr, dtype=np.float64).reshape(ms.shape[:2])
    w_lr = max(1, window // ratio)
    s_lr = max(1, (stride or window) // ratio)
    n = ms.shape[-1]
    total = 0.0
    for l in range(n):
        hi = uiqi(ms_hat[..., l], pan, window, stride)
        lo = uiqi(ms[..., l], pan_lr, w_lr, s_lr)
        total += abs(hi - lo) ** q
    return float((total / n) ** (1.0 / q))


def qnr(dl: float, ds: float, alpha: float = 1.0, beta: float = 1.0) -> float:
    return float((1.0 - dl) ** alpha * (1.0 - ds) ** beta)
