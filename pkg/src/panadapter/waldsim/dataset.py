"""Reduced/full-resolution sample generation and the on-disk dataset layout."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from ..gradcore.pstf import PstfError, read_tensor, write_tensor
from .degrade import DEFAULT_SIGMA, RATIO, degrade
from .scene import SceneError, SceneSpec, synth_pan, synth_scene

DATASET_VERSION = 1
SPLITS = ("train", "test_reduced", "test_full")
_SPLIT_CODES = {"train": 0, "test_reduced": 1, "test_full": 2, "pretrain": 3}


class DatasetError(RuntimeError):
    pass


@dataclass
class SamplePair:
    pan: np.ndarray
    lrms: np.ndarray
    gt: np.ndarray | None = None
    id: str = ""

    def __post_init__(self):
        hh, ww = self.pan.shape[:2]
        h, w = self.lrms.shape[:2]
        if self.pan.shape[-1] != 1 or hh != RATIO * h or ww != RATIO * w:
            raise DatasetError(
                f"{self.id}: PAN {self.pan.shape} and LRMS {self.lrms.shape} violate ratio {RATIO}"
            )
        if self.gt is not None and self.gt.shape != (hh, ww, self.lrms.shape[-1]):
            raise DatasetError(f"{self.id}: GT shape {self.gt.shape} inconsistent")


@dataclass
class DatasetManifest:
    ratio: int
    bands: int
    splits: dict
    files: dict
    seed: int
    version: int = DATASET_VERSION
    sigma: float = DEFAULT_SIGMA
    scene: dict | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def sample_seed(seed: int, split: str, index: int) -> int:
    """Per-sample seed derived from (dataset seed, split, index) only."""
    ss = np.random.SeedSequence([int(seed), _SPLIT_CODES[split], int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def reduced_pair(spec: SceneSpec, seed: int, sigma: float = DEFAULT_SIGMA,
                 ratio: int = RATIO) -> SamplePair:
    """One reduced-resolution triple with ``spec.size`` PAN extent.

    A scene is synthesised at ``ratio * size`` to stand in for the sensor's
    native PAN resolution; the native MS is its degraded version and becomes
    GT.  Network inputs degrade GT and native PAN once more.
    """
    scene = synth_scene(replace(spec, seed=seed, size=spec.size * ratio))
    pan_native = synth_pan(scene, spec.pan_weights).astype(np.float32)
    gt = degrade(scene, sigma, ratio).astype(np.float32)
    lrms = degrade(gt, sigma, ratio)
    pan = degrade(pan_native, sigma, ratio)
    return SamplePair(pan=pan, lrms=lrms, gt=gt)


def full_pair(spec: SceneSpec, seed: int, sigma: float = DEFAULT_SIGMA,
              ratio: int = RATIO) -> SamplePair:
    """One full-resolution pair (no GT): scene at PAN resolution, MS degraded from it."""
    scene = synth_scene(replace(spec, seed=seed)).astype(np.float32)
    pan = synth_pan(scene, spec.pan_weights)
    lrms = degrade(scene, sigma, ratio)
    return SamplePair(pan=pan, lrms=lrms)


def generate_split(spec: SceneSpec, split: str, count: int, sigma: float = DEFAULT_SIGMA,
                   workers: int = 1) -> list[SamplePair]:
    make = full_pair if split == "test_full" else reduced_pair

    def one(i: int) -> SamplePair:
        pair = make(spec, sample_seed(spec.seed, split, i), sigma)
        pair.id = f"{split}_{i:04d}"
        return pair

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(count)))
    return [one(i) for i in range(count)]


def build_dataset(spec: SceneSpec, n_train: int, n_test_reduced: int, n_test_full: int,
                  out_dir, sigma: float = DEFAULT_SIGMA, workers: int = 1) -> DatasetManifest:
    """Write all splits as PSTF files and finish with ``manifest.json``."""
    if spec.size % (4 * RATIO):
        raise SceneError(f"PAN size must be divisible by {4 * RATIO}, got {spec.size}")
    out = Path(out_dir)
    counts = {"train": n_train, "test_reduced": n_test_reduced, "test_full": n_test_full}
    files: dict[str, list[dict]] = {}
    for split in SPLITS:
        (out / split).mkdir(parents=True, exist_ok=True)
        entries = []
        for pair in generate_split(spec, split, counts[split], sigma, workers):
            stem = pair.id.split("_")[-1]
            entry = {"id": pair.id}
            for key in ("pan", "lrms", "gt"):
                arr = getattr(pair, key)
                if arr is None:
                    continue
                rel = f"{split}/{stem}_{key}.pstf"
                write_tensor(out / rel, arr)
                entry[key] = rel
            entries.append(entry)
        files[split] = entries
    scene = asdict(spec)
    scene["pan_weights"] = list(spec.pan_weights)
    manifest = DatasetManifest(ratio=RATIO, bands=spec.bands, splits=counts, files=files,
                               seed=int(spec.seed), sigma=float(sigma), scene=scene)
    tmp = out / "manifest.json.tmp"
    tmp.write_text(manifest.to_json(), encoding="utf-8")
    os.replace(tmp, out / "manifest.json")
    return manifest


def load_manifest(data_dir) -> DatasetManifest:
    path = Path(data_dir) / "manifest.json"
    if not path.exists():
        raise DatasetError(f"no manifest.json in {data_dir}; dataset incomplete or missing")
    raw = json.loads(path.read_text(encoding="utf-8"))
    try:
        return DatasetManifest(**raw)
    except TypeError as exc:
        raise DatasetError(f"malformed manifest: {exc}") from exc


def read_dataset(data_dir, split: str = "train") -> Iterator[SamplePair]:
    manifest = load_manifest(data_dir)
    if split not in manifest.files:
        raise DatasetError(f"split {split!r} not in manifest")
    entries = manifest.files[split]
    if len(entries) != manifest.splits[split]:
        raise DatasetError(f"split {split!r}: manifest lists {len(entries)} of {manifest.splits[split]}")
    root = Path(data_dir)
    for entry in entries:
        arrays = {}
        for key in ("pan", "lrms", "gt"):
            if key not in entry:
                continue
            path = root / entry[key]
            if not path.exists():
                raise DatasetError(f"missing file {path}")
            try:
                arrays[key] = read_tensor(path)
            except PstfError as exc:
                raise DatasetError(f"cannot parse {path}: {exc}") from exc
        if "pan" not in arrays or "lrms" not in arrays:
            raise DatasetError(f"{entry.get('id')}: pan/lrms entry missing")
        if arrays["lrms"].shape[-1] != manifest.bands:
            raise DatasetError(f"{entry['id']}: band count differs from manifest")
        yield SamplePair(id=entry["id"], **arrays)
