"""Finite-difference checks for every differentiable op and both stage graphs."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..gradcore import Tensor, double_precision, grad_check, ops
from .config import RunConfig
from .model import PanAdapter, configure_stage

OP_TOLERANCE = 1e-4
GRAPH_TOLERANCE = 1e-3

TINY_CONFIG = RunConfig(lrms_size=16, bands=4, channels=8, n_blocks=2, lpe_dim=4, prior_dim=8,
                        vit_depth=4, vit_dim=16, heads=4, mlp_ratio=2, adapter_dim=8, interval=2,
                        inr_hidden=16, inr_layers=3, seed=3)


def _t(rng, *shape, low=-1.0, high=1.0) -> Tensor:
    return Tensor(rng.uniform(low, high, size=shape))


def _mha(q, kv, wq, wk, wv, wo):
    return ops.multi_head_attention(q, kv, 2, wq, wk, wv, wo)


def op_cases() -> list[tuple[str, Callable, Callable]]:
    """``(name, fn, make_inputs(rng))`` triples; inputs are built in float64."""
    return [
        ("add", ops.add, lambda r: [_t(r, 3, 4), _t(r, 4)]),
        ("sub", ops.sub, lambda r: [_t(r, 3, 4), _t(r, 3, 1)]),
        ("mul", ops.mul, lambda r: [_t(r, 2, 3, 4), _t(r, 1, 4)]),
        ("div", ops.div, lambda r: [_t(r, 3, 4), _t(r, 3, 4, low=0.5, high=2.0)]),
        ("abs", ops.abs, lambda r: [_t(r, 5, 3)]),
        ("relu", ops.relu, lambda r: [_t(r, 5, 3)]),
        ("gelu", ops.gelu, lambda r: [_t(r, 5, 3, low=-3, high=3)]),
        ("sigmoid", ops.sigmoid, lambda r: [_t(r, 5, 3, low=-4, high=4)]),
        ("sine_act", lambda x: ops.sine_act(x, 30.0), lambda r: [_t(r, 4, 3, low=-0.1, high=0.1)]),
        ("sum", lambda x: ops.sum(x, axis=1), lambda r: [_t(r, 3, 4, 2)]),
        ("mean", lambda x: ops.mean(x, axis=(0, 2), keepdims=True), lambda r: [_t(r, 3, 4, 2)]),
        ("l1_loss", ops.l1_loss, lambda r: [_t(r, 4, 3), _t(r, 4, 3)]),
        ("matmul", ops.matmul, lambda r: [_t(r, 2, 3), _t(r, 3, 2)]),
        ("matmul_batched", ops.matmul, lambda r: [_t(r, 2, 3, 4), _t(r, 2, 4, 5)]),
        ("linear", ops.linear, lambda r: [_t(r, 2, 5, 3), _t(r, 3, 4), _t(r, 4)]),
        ("reshape", lambda x: ops.reshape(x, (4, 6)), lambda r: [_t(r, 2, 3, 4)]),
        ("transpose", lambda x: ops.transpose(x, (2, 0, 1)), lambda r: [_t(r, 2, 3, 4)]),
        ("getitem", lambda x: ops.getitem(x, (slice(1, 3), [0, 2, 2])), lambda r: [_t(r, 4, 3)]),
        ("gather", lambda x: ops.gather(x, np.array([2, 0, 2, 1]), 1), lambda r: [_t(r, 2, 3, 2)]),
        ("concat", lambda a, b: ops.concat([a, b], axis=-1), lambda r: [_t(r, 2, 3), _t(r, 2, 2)]),
        ("concat_channels", lambda a, b: ops.concat_channels([a, b]),
         lambda r: [_t(r, 1, 3, 3, 2), _t(r, 1, 3, 3, 1)]),
        ("patchify", lambda x: ops.patchify(x, 2), lambda r: [_t(r, 1, 4, 6, 2)]),
        ("unpatchify", lambda x: ops.unpatchify(x, 2, 2, 3), lambda r: [_t(r, 1, 6, 8)]),
        ("softmax_lastdim", ops.softmax_lastdim, lambda r: [_t(r, 3, 5, low=-3, high=3)]),
        ("layer_norm", lambda x, g, b: ops.layer_norm(x, g, b, 1e-5),
         lambda r: [_t(r, 3, 6), _t(r, 6), _t(r, 6)]),
        ("pad_reflect", lambda x: ops.pad_reflect(x, 2, 1), lambda r: [_t(r, 1, 4, 3, 2)]),
        ("conv2d", ops.conv2d, lambda r: [_t(r, 1, 5, 4, 2), _t(r, 3, 3, 2, 3), _t(r, 3)]),
        ("conv2d_1x1", ops.conv2d, lambda r: [_t(r, 2, 3, 3, 2), _t(r, 1, 1, 2, 3)]),
        ("depthwise_conv2d", ops.depthwise_conv2d,
         lambda r: [_t(r, 1, 4, 5, 3), _t(r, 3, 3, 3), _t(r, 3)]),
        ("upsample_bicubic", lambda x: ops.upsample_bicubic(x, 4), lambda r: [_t(r, 1, 3, 2, 2)]),
        ("multi_head_attention", _mha,
         lambda r: [_t(r, 3, 4), _t(r, 5, 4)] + [_t(r, 4, 4, low=-0.5, high=0.5) for _ in range(4)]),
    ]


def run_op_checks(seed: int = 0) -> dict[str, float]:
    results = {}
    with double_precision():
        for i, (name, fn, make) in enumerate(op_cases()):
            rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
            results[name] = grad_check(fn, make(rng), eps=1e-6, seed=seed)
    return results


def _randomize_zero_params(model, rng) -> None:
    """Give zero-initialised weights small random values so every path carries gradient."""
    for p in model.parameters():
        if not np.any(p.data):
            p.data = rng.uniform(-0.3, 0.3, size=p.shape)


def tiny_model(cfg: RunConfig = TINY_CONFIG, stage: int = 1, randomize: bool = True):
    """Tiny float64 model with the stage's freeze flags; must be called under double precision."""
    model = PanAdapter(cfg)
    model.sspen.mark_pretrained()
    model.mfin.mark_pretrained()
    configure_stage(model, stage)
    if randomize:
        _randomize_zero_params(model, np.random.default_rng(cfg.seed + 100))
    return model


def run_graph_checks(cfg: RunConfig = TINY_CONFIG, max_checks: int = 2,
                     seed: int = 0) -> dict[str, float]:
    """End-to-end checks of the stage-1 and stage-2 graphs w.r.t. inputs and trainable weights."""
    from ..sspen import make_q, sspen_forward

    results = {}
    with double_precision():
        rng = np.random.default_rng(seed)
        h, s = cfg.lrms_size, cfg.bands
        m_img = _t(rng, 1, h, h, s, low=0.2, high=0.8)
        pan = _t(rng, 1, 4 * h, 4 * h, 1, low=0.2, high=0.8)

        model = tiny_model(cfg, stage=1)
        params = [p for p in model.sspen.parameters() if p.trainable]

        def stage1(m, p, *_):
            return sspen_forward(model.sspen, m, p).O1

        results["stage1_graph"] = grad_check(stage1, [m_img, pan] + params, max_checks=max_checks,
                                             seed=seed)

        model = tiny_model(cfg, stage=2)
        q, m_up = make_q(m_img, pan)
        prior = model.sspen(m_img, pan)
        a, b = Tensor(prior.A.data), Tensor(prior.B.data)
        params = [p for p in model.mfin.parameters() if p.trainable]

        def stage2(a_, b_, q_, *_):
            return model.mfin(a_, b_, q_, m_up).O2

        results["stage2_graph"] = grad_check(stage2, [a, b, Tensor(q.data)] + params,
                                             max_checks=max_checks, seed=seed)
    return results
