"""Checkpoint directories: one PSTF per parameter plus a deterministic ``manifest.json``."""

from __future__ import annotations

import hashlib
import json
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..gradcore.pstf import PstfError, decode, encode

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


class LineageError(CheckpointError):
    """A required parent checkpoint is missing or does not match."""


@dataclass
class ParamEntry:
    name: str
    shape: tuple[int, ...]
    trainable: bool
    origin: str


@dataclass
class Checkpoint:
    stage: str
    config_hash: str
    entries: list[ParamEntry]
    tensors: dict[str, np.ndarray]
    parents: dict[str, str] = field(default_factory=dict)
    optimizer: dict | None = None

    def manifest(self) -> dict:
        params = []
        for e in self.entries:
            params.append({
                "name": e.name,
                "shape": list(e.shape),
                "trainable": e.trainable,
                "origin": e.origin,
                "file": _param_file(e.name),
                "sha256": hashlib.sha256(encode(self.tensors[e.name])).hexdigest(),
            })
        out = {
            "format": FORMAT_VERSION,
            "stage": self.stage,
            "config_hash": self.config_hash,
            "parents": dict(sorted(self.parents.items())),
            "params": params,
        }
        if self.optimizer is not None:
            out["optimizer"] = {"t": int(self.optimizer["t"]),
                                "keys": sorted(self.optimizer["m"])}
        return out

    def manifest_bytes(self) -> bytes:
        return (json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n").encode("utf-8")

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.manifest_bytes()).hexdigest()

    def state(self, prefix: str = "") -> dict[str, np.ndarray]:
        """Tensors under ``prefix`` with the prefix stripped."""
        return {k[len(prefix):]: v for k, v in self.tensors.items() if k.startswith(prefix)}

    def save(self, path) -> str:
        """Write atomically (temp dir then rename); returns the checkpoint hash."""
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        if tmp.exists():
            shutil.rmtree(tmp)
        (tmp / "params").mkdir(parents=True)
        for e in self.entries:
            (tmp / _param_file(e.name)).write_bytes(encode(self.tensors[e.name]))
        if self.optimizer is not None:
            (tmp / "optim").mkdir()
            for key in sorted(self.optimizer["m"]):
                (tmp / "optim" / f"{key}.m.pstf").write_bytes(encode(self.optimizer["m"][key]))
                (tmp / "optim" / f"{key}.v.pstf").write_bytes(encode(self.optimizer["v"][key]))
        (tmp / "manifest.json").write_bytes(self.manifest_bytes())
        if path.exists():
            shutil.rmtree(path)
        os.replace(tmp, path)
        return self.hash


def _param_file(name: str) -> str:
    return f"params/{name}.pstf"


def from_parameters(named, stage: str, config_hash: str, origins: dict[str, str] | None = None,
                    parents: dict[str, str] | None = None, optimizer: dict | None = None,
                    default_origin: str = "init") -> Checkpoint:
    entries, tensors = [], {}
    origins = origins or {}
    for name, p in named:
        entries.append(ParamEntry(name, tuple(p.shape), bool(p.trainable),
                                  origins.get(name, default_origin)))
        tensors[name] = p.data.copy()
    return Checkpoint(stage=stage, config_hash=config_hash, entries=entries, tensors=tensors,
                      parents=dict(parents or {}), optimizer=optimizer)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    try:
        raw = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt manifest in {path}: {exc}") from exc
    if raw.get("format") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {raw.get('format')}")
    entries, tensors = [], {}
    for item in raw["params"]:
        blob = (path / item["file"]).read_bytes()
        if hashlib.sha256(blob).hexdigest() != item["sha256"]:
            raise CheckpointError(f"{item['name']}: file hash mismatch")
        try:
            arr = decode(blob)
        except PstfError as exc:
            raise CheckpointError(f"{item['name']}: {exc}") from exc
        if list(arr.shape) != item["shape"]:
            raise CheckpointError(f"{item['name']}: shape differs from manifest")
        entries.append(ParamEntry(item["name"], tuple(item["shape"]), bool(item["trainable"]),
                                  item["origin"]))
        tensors[item["name"]] = arr
    optimizer = None
    if "optimizer" in raw:
        keys = raw["optimizer"]["keys"]
        optimizer = {
            "t": raw["optimizer"]["t"],
            "m": {k: decode((path / "optim" / f"{k}.m.pstf").read_bytes()) for k in keys},
            "v": {k: decode((path / "optim" / f"{k}.v.pstf").read_bytes()) for k in keys},
        }
    ckpt = Checkpoint(stage=raw["stage"], config_hash=raw["config_hash"], entries=entries,
                      tensors=tensors, parents=dict(raw.get("parents", {})), optimizer=optimizer)
    if ckpt.manifest_bytes() != manifest_path.read_bytes():
        raise CheckpointError(f"manifest in {path} is not in canonical form")
    return ckpt


def count_params(ckpt: Checkpoint) -> tuple[int, int, float]:
    """``(total, trainable, trainable / total)`` from the manifest shapes."""
    total = trainable = 0
    for e in ckpt.entries:
        n = int(np.prod(e.shape, dtype=np.int64))
        total += n
        if e.trainable:
            trainable += n
    return total, trainable, (trainable / total if total else 0.0)
