"""Synthetic scenes and Wald-protocol PAN/LRMS/GT generation."""

from .dataset import (
    DatasetError,
    DatasetManifest,
    SamplePair,
    build_dataset,
    full_pair,
    generate_split,
    load_manifest,
    read_dataset,
    reduced_pair,
    sample_seed,
)
from .degrade import DEFAULT_SIGMA, RATIO, degrade, gaussian_blur, gaussian_kernel
from .scene import SceneError, SceneSpec, synth_pan, synth_scene

__all__ = [
    "DEFAULT_SIGMA", "DatasetError", "DatasetManifest", "RATIO", "SamplePair", "SceneError",
    "SceneSpec", "build_dataset", "degrade", "full_pair", "gaussian_blur", "gaussian_kernel",
    "generate_split",
    "load_manifest", "read_dataset", "reduced_pair", "sample_seed", "synth_pan", "synth_scene",
]
