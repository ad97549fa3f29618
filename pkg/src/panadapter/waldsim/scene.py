"""Deterministic synthetic multispectral scenes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of one synthetic scene.

    ``pan_weights`` defaults to a uniform band average.  ``gradient_strength``
    scales the linear illumination ramp; zero disables it.
    """

    seed: int = 0
    size: int = 64
    bands: int = 4
    blob_count: int = 24
    noise_sigma: float = 0.01
    gradient_strength: float = 0.15
    pan_weights: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.size <= 0 or self.size % 4:
            raise SceneError(f"scene size must be a positive multiple of 4, got {self.size}")
        if self.bands not in (4, 8):
            raise SceneError(f"bands must be 4 or 8, got {self.bands}")
        if self.blob_count < 0 or self.noise_sigma < 0:
            raise SceneError("blob_count and noise_sigma must be non-negative")
        if not self.pan_weights:
            object.__setattr__(self, "pan_weights", tuple([1.0 / self.bands] * self.bands))
        check_pan_weights(self.pan_weights, self.bands)


def check_pan_weights(weights, bands: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (bands,):
        raise SceneError(f"expected {bands} pan weights, got {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-6:
        raise SceneError("pan weights must be non-negative and sum to 1")
    return w


def synth_scene(spec: SceneSpec) -> np.ndarray:
    """``(size, size, bands)`` float64 scene in ``[0, 1]``.

    Base level 0.5, plus a shared linear ramp with per-band gain, plus
    Gaussian blobs whose spectra share a common signature (so bands are
    correlated), plus white per-band texture of std ``noise_sigma``.
    """
    rng = np.random.default_rng(spec.seed)
    n, s = spec.size, spec.bands
    coords = (np.arange(n) + 0.5) / n
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    img = np.full((n, n, s), 0.5)

    direction = rng.uniform(-1.0, 1.0, size=2)
    band_gain = rng.uniform(0.5, 1.0, size=s)
    if spec.gradient_strength:
        ramp = direction[0] * (xx - 0.5) + direction[1] * (yy - 0.5)
        img += spec.gradient_strength * ramp[..., None] * band_gain

    signature = rng.uniform(0.4, 1.0, size=s)
    for _ in range(spec.blob_count):
        cy, cx = rng.uniform(0.0, 1.0, size=2)
        radius = np.exp(rng.uniform(np.log(0.006), np.log(0.12)))
        amp = rng.uniform(-0.3, 0.3)
        spectrum = np.clip(signature + 0.3 * rng.standard_normal(s), -0.5, 1.5)
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * radius * radius))
        img += amp * blob[..., None] * spectrum

    if spec.noise_sigma:
        img += spec.noise_sigma * rng.standard_normal((n, n, s))
    return np.clip(img, 0.0, 1.0)


def synth_pan(gt: np.ndarray, weights) -> np.ndarray:
    """Pixelwise weighted band sum, ``(H, W, s) -> (H, W, 1)``; keeps ``gt``'s dtype."""
    gt = np.asarray(gt)
    w = check_pan_weights(weights, gt.shape[-1])
    pan = np.tensordot(gt.astype(np.float64), w, axes=([-1], [0]))[..., None]
    return pan.astype(gt.dtype)
