"""Configuration, training stages, evaluation, checkpoints and the CLI."""

from .checkpoint import (
    Checkpoint,
    CheckpointError,
    LineageError,
    count_params,
    from_parameters,
    load_checkpoint,
)
from .config import ConfigError, RunConfig, load_config, parse_config
from .evaluate import EvaluationError, evaluate
from .model import PanAdapter, configure_stage, is_backbone
from .optim import Adam, DivergenceError, clip_grad_norm, run_optimizer
from .train import (
    generate_data,
    load_model,
    load_pretrained,
    prepare_stage2,
    pretrain,
    train_stage1,
    train_stage2,
)

__all__ = [
    "Adam", "Checkpoint", "CheckpointError", "ConfigError", "DivergenceError", "EvaluationError",
    "LineageError", "PanAdapter", "RunConfig", "clip_grad_norm", "configure_stage",
    "count_params", "evaluate", "from_parameters", "generate_data", "is_backbone",
    "load_checkpoint", "load_config", "load_model", "load_pretrained", "parse_config",
    "prepare_stage2", "pretrain", "run_optimizer", "train_stage1", "train_stage2",
]
