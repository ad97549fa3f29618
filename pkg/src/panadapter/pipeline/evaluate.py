"""Reduced- and full-resolution evaluation of trained checkpoints."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..gradcore import Tensor, no_grad
from ..metrics import FullReport, ReducedReport, full_metrics, reduced_metrics
from ..sspen import make_q
from ..waldsim import degrade
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint
from .config import RunConfig
from .train import ckpt_dir, load_model, load_split

SPLITS = {"reduced": "test_reduced", "full": "test_full"}
PREDICTORS = ("model", "gt", "bicubic")


class EvaluationError(RuntimeError):
    pass


def predict(model, pair, stage: int) -> np.ndarray:
    """Network output for one sample as ``(H, W, s)`` float64."""
    with no_grad():
        m_img = Tensor(pair.lrms[None])
        q, m_up = make_q(m_img, pair.pan)
        out = model.sspen.from_taps(*model.sspen.taps(m_img, q), m_up)
        if stage == 1:
            return out.O1.data[0].astype(np.float64)
        o2 = model.mfin(out.A, out.B, q, m_up).O2
        return o2.data[0].astype(np.float64)


def bicubic(pair) -> np.ndarray:
    with no_grad():
        _, m_up = make_q(pair.lrms, pair.pan)
    return m_up.data[0].astype(np.float64)


def evaluate(cfg: RunConfig, split: str = "reduced", stage: int = 2, ckpt: Checkpoint | None = None,
             predictor: str = "model", out_dir=None, write: bool = True):
    """Score ``split`` and (optionally) write ``report.{csv,json}``.

    Full-resolution reports are written as ``report_full.*`` so both splits
    can share one output directory.
    """
    if split not in SPLITS:
        raise EvaluationError(f"split must be one of {sorted(SPLITS)}, got {split!r}")
    if predictor not in PREDICTORS:
        raise EvaluationError(f"unknown predictor {predictor!r}")
    out_dir = Path(out_dir or cfg.out_path)
    model = None
    if predictor == "model":
        if ckpt is None:
            path = ckpt_dir(out_dir, f"stage{stage}")
            try:
                ckpt = load_checkpoint(path)
            except CheckpointError as exc:
                raise EvaluationError(f"no stage-{stage} checkpoint to evaluate: {exc}") from exc
        if ckpt.stage != str(stage):
            raise EvaluationError(f"checkpoint is stage {ckpt.stage}, evaluation asked for stage {stage}")
        model = load_model(cfg, ckpt)
    pairs = load_split(cfg, SPLITS[split])
    if split == "reduced" and any(p.gt is None for p in pairs):
        raise EvaluationError("reduced split samples need GT")
    report = ReducedReport() if split == "reduced" else FullReport()
    for pair in pairs:
        if predictor == "model":
            pred = predict(model, pair, stage)
        elif predictor == "bicubic":
            pred = bicubic(pair)
        else:
            if pair.gt is None:
                raise EvaluationError("the GT predictor needs a split with GT")
            pred = pair.gt.astype(np.float64)
        if split == "reduced":
            values = reduced_metrics(pred, pair.gt, window=cfg.window, peak=cfg.peak)
        else:
            pan_lr = degrade(pair.pan.astype(np.float64), cfg.sigma)
            values = full_metrics(pred, pair.lrms, pair.pan, pan_lr, window=cfg.window,
                                  sigma=cfg.sigma)
        report.add(pair.id, **values)
    if write:
        report.write(out_dir, "report" if split == "reduced" else "report_full")
    return report
