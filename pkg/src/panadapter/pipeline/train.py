"""Backbone pretraining and the two fine-tuning stages."""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

import numpy as np

from ..gradcore import Tensor, no_grad, ops
from ..mfin import pretrain_vit
from ..sspen import make_q, pretrain_edsr
from ..waldsim import SceneSpec, build_dataset, read_dataset
from .checkpoint import Checkpoint, LineageError, from_parameters, load_checkpoint
from .config import RunConfig
from .model import PanAdapter, configure_stage, is_backbone
from .optim import run_optimizer

log = logging.getLogger(__name__)

PRETRAIN_PARTS = {
    "edsr_spe": "sspen.spe.backbone.",
    "edsr_spa": "sspen.spa.backbone.",
    "vit": "mfin.vit.",
}


def ckpt_dir(out, name: str) -> Path:
    return Path(out) / "ckpt" / name


def scene_spec(cfg: RunConfig) -> SceneSpec:
    return SceneSpec(seed=cfg.seed, size=cfg.pan_size, bands=cfg.bands,
                     blob_count=cfg.blob_count, noise_sigma=cfg.noise_sigma)


def generate_data(cfg: RunConfig):
    return build_dataset(scene_spec(cfg), cfg.n_train, cfg.n_test_reduced, cfg.n_test_full,
                         cfg.data_path, sigma=cfg.sigma)


# ---------------------------------------------------------------- loss log

def write_losses(out_dir, stage: str, history: list[float]) -> None:
    """Replace ``stage``'s rows in ``loss.csv``; rows of other stages are kept."""
    path = Path(out_dir) / "loss.csv"
    rows = []
    if path.exists():
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.DictReader(fh) if r["stage"] != stage]
    rows += [{"stage": stage, "step": str(i), "loss": repr(float(v))} for i, v in enumerate(history)]
    rows.sort(key=lambda r: (r["stage"], int(r["step"])))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["stage", "step", "loss"], lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")


def read_losses(out_dir, stage: str) -> list[float]:
    with (Path(out_dir) / "loss.csv").open(newline="", encoding="utf-8") as fh:
        return [float(r["loss"]) for r in csv.DictReader(fh) if r["stage"] == stage]


# ---------------------------------------------------------------- pretraining

def pretrain(cfg: RunConfig) -> dict[str, str]:
    """Pretrain and freeze the three backbones; returns checkpoint hashes by part."""
    model = PanAdapter(cfg)
    jobs = {
        "edsr_spe": (model.sspen.spe.backbone,
                     lambda b: pretrain_edsr(b, cfg.seed, cfg.pretrain_steps, cfg.bands,
                                             corpus_size=cfg.pretrain_corpus, batch=cfg.batch,
                                             lr=cfg.pretrain_lr)),
        "edsr_spa": (model.sspen.spa.backbone,
                     lambda b: pretrain_edsr(b, cfg.seed, cfg.pretrain_steps, cfg.bands,
                                             corpus_size=cfg.pretrain_corpus, batch=cfg.batch,
                                             lr=cfg.pretrain_lr)),
        "vit": (model.mfin.vit,
                lambda v: pretrain_vit(v, cfg.seed, cfg.pretrain_steps, cfg.bands,
                                       size=cfg.pan_size, corpus_size=cfg.pretrain_corpus,
                                       batch=cfg.batch, lr=cfg.pretrain_lr)),
    }
    hashes = {}
    for part, (module, job) in jobs.items():
        history = job(module)
        write_losses(cfg.out_path, f"pretrain_{part}", history)
        ckpt = from_parameters(module.named_parameters(), "pretrain", cfg.config_hash(),
                               default_origin="pretrain")
        hashes[part] = ckpt.save(ckpt_dir(cfg.out_path, f"pretrain/{part}"))
        log.info("pretrained %s (%d steps)", part, cfg.pretrain_steps)
    return hashes


def load_pretrained(model: PanAdapter, pretrain_dir) -> dict[str, str]:
    hashes = {}
    for part, prefix in PRETRAIN_PARTS.items():
        path = Path(pretrain_dir) / part
        try:
            ckpt = load_checkpoint(path)
        except Exception as exc:
            raise LineageError(f"pretrained backbone {part!r} unavailable at {path}: {exc}") from exc
        module = _module_at(model, prefix)
        module.load_state_dict(ckpt.tensors)
        module.freeze()
        hashes[f"pretrain/{part}"] = ckpt.hash
    model.sspen.mark_pretrained()
    model.mfin.mark_pretrained()
    return hashes


def _module_at(model, prefix: str):
    obj = model
    for attr in prefix.rstrip(".").split("."):
        obj = getattr(obj, attr)
    return obj


# ---------------------------------------------------------------- data tensors

def load_split(cfg: RunConfig, split: str) -> list:
    return list(read_dataset(cfg.data_path, split))


def stack(pairs, key: str) -> np.ndarray:
    return np.stack([getattr(p, key) for p in pairs]).astype(np.float32)


def _origins(model: PanAdapter, stage: str, parent_origins: dict[str, str]) -> dict[str, str]:
    out = {}
    for name, p in model.named_parameters():
        if is_backbone(name):
            out[name] = "pretrain"
        elif p.trainable:
            out[name] = stage
        else:
            out[name] = parent_origins.get(name, "init")
    return out


def _sspen_params(model: PanAdapter):
    return [(n, p) for n, p in model.named_parameters() if n.startswith("sspen.")]


# ---------------------------------------------------------------- stage 1

def train_stage1(cfg: RunConfig, pretrain_dir=None, out_dir=None) -> Checkpoint:
    """Fit LPE taps, projections and Tail 1 with the EDSR branches frozen."""
    out_dir = Path(out_dir or cfg.out_path)
    model = PanAdapter(cfg)
    parents = load_pretrained(model, pretrain_dir or ckpt_dir(cfg.out_path, "pretrain"))
    configure_stage(model, 1)
    pairs = load_split(cfg, "train")
    m_all = Tensor(stack(pairs, "lrms"))
    gt = stack(pairs, "gt")
    with no_grad():
        q, m_up = make_q(m_all, stack(pairs, "pan"))
        taps_spe, taps_spa = model.sspen.taps(m_all, q)
    taps_spe = [t.data for t in taps_spe]
    taps_spa = [t.data for t in taps_spa]
    m_up = m_up.data

    def loss_at(idx):
        out = model.sspen.from_taps([Tensor(t[idx]) for t in taps_spe],
                                    [Tensor(t[idx]) for t in taps_spa], Tensor(m_up[idx]))
        return ops.l1_loss(out.O1, Tensor(gt[idx]))

    params = [p for _, p in _sspen_params(model) if p.trainable]
    history, opt = run_optimizer(params, loss_at, len(pairs), cfg.steps1, cfg.batch, cfg.lr1,
                                 cfg.seed * 2 + 1, cfg.clip)
    write_losses(out_dir, "1", history)
    ckpt = from_parameters(_sspen_params(model), "1", cfg.config_hash(),
                           origins=_origins(model, "1", {}), parents=parents,
                           optimizer=opt.state())
    ckpt.save(ckpt_dir(out_dir, "stage1"))
    return ckpt


# ---------------------------------------------------------------- stage 2

def prepare_stage2(cfg: RunConfig, stage1_dir=None, pretrain_dir=None):
    """Model with stage-1 weights loaded and stage-2 freeze flags set.

    Returns ``(model, parents, stage1)``.
    """
    stage1 = None
    if not cfg.single_stage:
        path = Path(stage1_dir or ckpt_dir(cfg.out_path, "stage1"))
        if not (path / "manifest.json").exists():
            raise LineageError(f"stage 2 needs a stage-1 checkpoint at {path}; run `train --stage 1`")
        stage1 = load_checkpoint(path)
    model = PanAdapter(cfg)
    parents = load_pretrained(model, pretrain_dir or ckpt_dir(cfg.out_path, "pretrain"))
    if stage1 is not None:
        if stage1.stage != "1":
            raise LineageError(f"{path} holds a stage-{stage1.stage} checkpoint, expected stage 1")
        model.sspen.load_state_dict(stage1.state("sspen."))
        parents = {**parents, "stage1": stage1.hash}
        if type(model.mfin.tail) is type(model.sspen.tail):
            # Tail 2 starts from the decoder stage 1 converged to
            model.mfin.tail.load_state_dict(model.sspen.tail.state_dict())
    configure_stage(model, 2, single_stage=cfg.single_stage)
    return model, parents, stage1


def train_stage2(cfg: RunConfig, stage1_dir=None, pretrain_dir=None, out_dir=None,
                 record_streams: bool = False) -> Checkpoint:
    """Fit adapters, boundary projections and Tail 2; SSPEN and the ViT stay frozen."""
    out_dir = Path(out_dir or cfg.out_path)
    model, parents, stage1 = prepare_stage2(cfg, stage1_dir, pretrain_dir)
    pairs = load_split(cfg, "train")
    m_all = Tensor(stack(pairs, "lrms"))
    gt = stack(pairs, "gt")
    with no_grad():
        q, m_up = make_q(m_all, stack(pairs, "pan"))
        taps_spe, taps_spa = model.sspen.taps(m_all, q)
        frozen = model.sspen.from_taps(taps_spe, taps_spa, m_up)
    q, m_up = q.data, m_up.data

    if cfg.single_stage:
        taps_spe = [t.data for t in taps_spe]
        taps_spa = [t.data for t in taps_spa]

        def priors(idx):
            a = model.sspen.spe.prior_from_taps([Tensor(t[idx]) for t in taps_spe])
            b = model.sspen.spa.prior_from_taps([Tensor(t[idx]) for t in taps_spa])
            return a, b
    else:
        a_all, b_all = frozen.A.data, frozen.B.data

        def priors(idx):
            return Tensor(a_all[idx]), Tensor(b_all[idx])

    def loss_at(idx):
        a, b = priors(idx)
        out = model.mfin(a, b, Tensor(q[idx]), Tensor(m_up[idx]))
        return ops.l1_loss(out.O2, Tensor(gt[idx]))

    params = [p for p in model.parameters() if p.trainable]
    history, opt = run_optimizer(params, loss_at, len(pairs), cfg.steps2, cfg.batch, cfg.lr2,
                                 cfg.seed * 2 + 2, cfg.clip)
    write_losses(out_dir, "2", history)
    s1_origins = {e.name: e.origin for e in stage1.entries} if stage1 else {}
    ckpt = from_parameters(model.named_parameters(), "2", cfg.config_hash(),
                           origins=_origins(model, "2", s1_origins), parents=parents,
                           optimizer=opt.state())
    ckpt.save(ckpt_dir(out_dir, "stage2"))
    return ckpt


def load_model(cfg: RunConfig, ckpt: Checkpoint) -> PanAdapter:
    """Model whose parameters (and trainable flags) come from ``ckpt``."""
    model = PanAdapter(cfg)
    params = dict(model.named_parameters())
    for e in ckpt.entries:
        if e.name not in params:
            raise LineageError(f"checkpoint parameter {e.name} not in the configured model")
        p = params[e.name]
        if tuple(p.shape) != e.shape:
            raise LineageError(f"{e.name}: checkpoint shape {e.shape} vs model {p.shape}")
        p.data = ckpt.tensors[e.name].astype(p.data.dtype, copy=True)
        p.trainable = e.trainable
    expected = [n for n in params if ckpt.stage == "2" or n.startswith("sspen.")]
    missing = sorted(set(expected) - set(ckpt.tensors))
    if missing:
        raise LineageError(f"checkpoint lacks {len(missing)} parameters, e.g. {missing[0]}")
    model.sspen.mark_pretrained()
    model.mfin.mark_pretrained()
    return model
