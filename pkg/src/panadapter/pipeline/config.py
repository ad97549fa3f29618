"""Run configuration: dataclass defaults, INI-style files, and a path-free hash."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


# section name for every field, used for both reading and writing config files
_SECTIONS = {
    "data": ("data_dir", "lrms_size", "bands", "n_train", "n_test_reduced", "n_test_full",
             "sigma", "blob_count", "noise_sigma"),
    "model": ("channels", "n_blocks", "lpe_dim", "prior_dim", "vit_depth", "vit_dim", "heads",
              "mlp_ratio", "adapter_dim", "interval", "inr_hidden", "inr_layers", "w0"),
    "pretrain": ("pretrain_steps", "pretrain_lr", "pretrain_corpus"),
    "train": ("seed", "steps1", "steps2", "batch", "lr1", "lr2", "clip"),
    "ablation": ("no_ctf", "no_cti", "single_stage", "replace_inr", "no_tail2_residual"),
    "eval": ("window", "peak"),
    "run": ("out_dir",),
}
# paths never enter the hash so relocated runs stay byte-identical
_UNHASHED = {"data_dir", "out_dir"}


@dataclass(frozen=True)
class RunConfig:
    data_dir: str = ""
    lrms_size: int = 16
    bands: int = 4
    n_train: int = 8
    n_test_reduced: int = 20
    n_test_full: int = 20
    sigma: float = 1.7
    blob_count: int = 24
    noise_sigma: float = 0.01

    channels: int = 32
    n_blocks: int = 8
    lpe_dim: int = 8
    prior_dim: int = 32
    vit_depth: int = 8
    vit_dim: int = 64
    heads: int = 4
    mlp_ratio: int = 2
    adapter_dim: int = 32
    interval: int = 4
    inr_hidden: int = 64
    inr_layers: int = 4
    w0: float = 30.0

    pretrain_steps: int = 200
    pretrain_lr: float = 1e-3
    pretrain_corpus: int = 8

    seed: int = 7
    steps1: int = 500
    steps2: int = 500
    batch: int = 4
    lr1: float = 5e-4
    lr2: float = 1e-4
    clip: float = 1.0

    no_ctf: bool = False
    no_cti: bool = False
    single_stage: bool = False
    replace_inr: bool = False
    no_tail2_residual: bool = False

    window: int = 32
    peak: float = 1.0

    out_dir: str = "out"

    def __post_init__(self):
        positive = ("lrms_size", "bands", "channels", "n_blocks", "lpe_dim", "prior_dim",
                    "vit_depth", "vit_dim", "heads", "mlp_ratio", "adapter_dim", "interval",
                    "inr_hidden", "inr_layers", "batch", "window")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.vit_depth % self.interval:
            raise ConfigError(f"interval t={self.interval} must divide vit_depth L={self.vit_depth}")
        if self.adapter_dim > self.vit_dim:
            raise ConfigError("adapter_dim k must not exceed vit_dim D")
        if self.bands not in (4, 8):
            raise ConfigError("bands must be 4 or 8")
        if self.lpe_dim >= self.channels:
            raise ConfigError("lpe_dim d' must be below channels D_c")
        for name in ("vit_dim", "adapter_dim"):
            if getattr(self, name) % self.heads:
                raise ConfigError(f"{name} must be divisible by heads")
        if self.steps1 < 0 or self.steps2 < 0 or self.pretrain_steps < 0:
            raise ConfigError("step counts must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def pan_size(self) -> int:
        return 4 * self.lrms_size

    @property
    def data_path(self) -> Path:
        return Path(self.data_dir) if self.data_dir else Path(self.out_dir) / "data"

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def hashable(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in _UNHASHED}

    def config_hash(self) -> str:
        blob = json.dumps(self.hashable(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        for section, names in _SECTIONS.items():
            parser[section] = {n: _format(getattr(self, n)) for n in names}
        lines = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines += [f"{k} = {v}" for k, v in parser[section].items()]
            lines.append("")
        return "\n".join(lines)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _field_types() -> dict:
    defaults = RunConfig()
    return {f.name: type(getattr(defaults, f.name)) for f in fields(RunConfig)}


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` text with sections; unknown sections or keys are errors."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    types = _field_types()
    changes = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser[section].items():
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            kind = types[key]
            try:
                if kind is bool:
                    value = parser[section].getboolean(key)
                elif kind is int:
                    value = int(raw)
                elif kind is float:
                    value = float(raw)
                else:
                    value = raw
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
            changes[key] = value
    return (base or RunConfig()).replace(**changes)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
