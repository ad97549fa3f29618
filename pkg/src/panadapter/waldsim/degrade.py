"""Wald-protocol degradation: Gaussian MTF stand-in followed by decimation."""

from __future__ import annotations

import math

import numpy as np

DEFAULT_SIGMA = 1.7
RATIO = 4


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalised 1-D Gaussian taps with radius ``ceil(3 sigma)``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    r = math.ceil(3 * sigma)
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-x * x / (2.0 * sigma * sigma))
    return k / k.sum()


def _blur_axis(img: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    r = len(taps) // 2
    pad = [(0, 0)] * img.ndim
    pad[axis] = (r, r)
    padded = np.pad(img, pad, mode="reflect")
    n = img.shape[axis]
    out = np.zeros_like(img)
    for i, w in enumerate(taps):
        out += w * np.take(padded, np.arange(i, i + n), axis=axis)
    return out


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    taps = gaussian_kernel(sigma)
    return _blur_axis(_blur_axis(img, taps, 0), taps, 1)


def degrade(gt: np.ndarray, sigma: float = DEFAULT_SIGMA, ratio: int = RATIO) -> np.ndarray:
    """Blur each band and keep every ``ratio``-th pixel starting at ``ratio // 2``.

    Works on ``(H, W)`` or ``(H, W, c)``; computes in float64 and returns the
    input dtype.
    """
    gt = np.asarray(gt)
    hh, ww = gt.shape[:2]
    if ratio < 1 or hh % ratio or ww % ratio:
        raise ValueError(f"extent {hh}x{ww} not divisible by ratio {ratio}")
    blurred = gaussian_blur(gt.astype(np.float64), sigma)
    off = ratio // 2
    return np.ascontiguousarray(blurred[off::ratio, off::ratio]).astype(gt.dtype)
