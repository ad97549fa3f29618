import numpy as np
import pytest

from panadapter.gradcore import Tensor, double_precision, grad_check, no_grad
from panadapter.mfin import (
    Ctf,
    Cti,
    Mfin,
    MissingVitWeightsError,
    VitBackbone,
    WeightNet,
    ctf,
    mfin_forward,
    pretrain_vit,
    tokenize_priors,
)

# ---------------------------------------------------------------- numpy oracles

def np_ln(x, g, b, eps=1e-5):
    mu = x.mean(-1, keepdims=True)
    var = ((x - mu) ** 2).mean(-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * g + b


def np_mha(q, kv, layer, heads):
    def proj(x, lin):
        return x @ lin.weight.data + lin.bias.data

    qq, kk, vv = proj(q, layer.q), proj(kv, layer.k), proj(kv, layer.v)
    d = q.shape[-1] // heads
    outs = []
    for h in range(heads):
        sl = slice(h * d, (h + 1) * d)
        s = qq[:, sl] @ kk[:, sl].T / np.sqrt(d)
        w = np.exp(s - s.max(-1, keepdims=True))
        w /= w.sum(-1, keepdims=True)
        outs.append(w @ vv[:, sl])
    return proj(np.concatenate(outs, -1), layer.out)


def np_gelu(x):
    from math import erf, sqrt
    return x * 0.5 * (1 + np.vectorize(erf)(x / sqrt(2)))


def np_weight_net(x, net):
    h = np_gelu(x @ net.fc1.weight.data + net.fc1.bias.data)
    return 1 / (1 + np.exp(-(h @ net.fc2.weight.data + net.fc2.bias.data)))


def lin(x, layer):
    return x @ layer.weight.data + layer.bias.data


# ---------------------------------------------------------------- fixtures

def tiny_mfin(rng, **kw):
    args = dict(vit_dim=16, depth=4, heads=4, adapter_dim=8, interval=2, pos_grid=4,
                inr_hidden=12, inr_layers=3)
    args.update(kw)
    model = Mfin(4, 6, rng, **args)
    model.assign_names()
    model.vit.freeze()
    model.mark_pretrained()
    return model


def tiny_inputs(h=4, seed=0):
    r = np.random.default_rng(seed)
    a = Tensor(r.random((1, h, h, 6)))
    b = Tensor(r.random((1, 4 * h, 4 * h, 6)))
    q = Tensor(r.random((1, 4 * h, 4 * h, 5)))
    m_up = Tensor(r.random((1, 4 * h, 4 * h, 4)))
    return a, b, q, m_up


# ---------------------------------------------------------------- tokenisation

def test_token_counts_match_for_ratio_four(rng):
    model = tiny_mfin(rng, pos_grid=16)
    a = Tensor(np.zeros((1, 16, 16, 6)))
    b = Tensor(np.zeros((1, 64, 64, 6)))
    f_spe, f_spa = tokenize_priors(model, a, b)
    assert f_spe.shape == (1, 256, 8) and f_spa.shape == (1, 256, 8)


def test_identity_projection_keeps_pixels(rng):
    model = Mfin(4, 8, rng, vit_dim=16, depth=2, heads=4, adapter_dim=8, interval=2, pos_grid=2)
    model.tok_a.weight.data = np.eye(8, dtype=np.float32)
    model.tok_a.bias.data[:] = 0
    a = np.random.default_rng(0).random((1, 2, 2, 8)).astype(np.float32)
    f_spe, _ = model.tokenize_priors(Tensor(a), Tensor(np.zeros((1, 8, 8, 8))))
    np.testing.assert_array_equal(f_spe.data[0], a[0].reshape(4, 8))


def test_tokenize_hand_matmul(rng):
    model = Mfin(4, 2, rng, vit_dim=16, depth=2, heads=4, adapter_dim=4, interval=2, pos_grid=2)
    w = np.array([[1.0, 0.0, 2.0, -1.0], [0.0, 1.0, 1.0, 3.0]], dtype=np.float32)
    model.tok_a.weight.data = w
    model.tok_a.bias.data = np.array([0.5, 0.0, 0.0, 0.0], dtype=np.float32)
    a = np.array([[[1, 2], [3, 4]], [[5, 6], [7, 8]]], dtype=np.float32)[None]
    f_spe, _ = model.tokenize_priors(Tensor(a), Tensor(np.zeros((1, 8, 8, 2))))
    expected = [[1.5, 2, 4, 5], [3.5, 4, 10, 9], [5.5, 6, 16, 13], [7.5, 8, 22, 17]]
    np.testing.assert_allclose(f_spe.data[0], expected)


def test_tokenize_rejects_misaligned_priors(rng):
    model = tiny_mfin(rng)
    with pytest.raises(ValueError):
        model.tokenize_priors(Tensor(np.zeros((1, 4, 4, 6))), Tensor(np.zeros((1, 12, 12, 6))))


# ---------------------------------------------------------------- weight net, CTF, CTI

def test_weight_net_zero_weights_give_half(rng):
    net = WeightNet(8, rng)
    for p in net.parameters():
        p.data[...] = 0
    out = net(Tensor(np.random.default_rng(0).normal(size=(5, 8)))).data
    np.testing.assert_array_equal(out, 0.5)


def test_weight_net_range_and_hand_values(rng):
    net = WeightNet(8, rng)
    x = np.random.default_rng(0).normal(0, 5, size=(50, 8))
    with double_precision():
        for p in net.parameters():
            p.data = p.data.astype(np.float64)
        out = net(Tensor(x)).data
    assert np.all(out > 0) and np.all(out < 1)
    np.testing.assert_allclose(out, np_weight_net(x, net), rtol=1e-10)


def _zero(layer):
    layer.weight.data[...] = 0
    layer.bias.data[...] = 0


def test_ctf_zero_gate_identity(rng):
    module = Ctf(8, 4, rng)
    _zero(module.gate.fc2)
    module.gate.fc2.bias.data[...] = -1e4  # sigmoid -> 0
    _zero(module.attn.out)
    _zero(module.fc2)
    r = np.random.default_rng(0)
    f_spe, f_spa, f_vit = (Tensor(r.normal(size=(1, 6, 8))) for _ in range(3))
    out = ctf(module, f_spe, f_spa, f_vit, "spa").data
    np.testing.assert_allclose(out, f_spa.data, atol=1e-7)
    with pytest.raises(ValueError):
        ctf(module, f_spe, f_spa, f_vit, "both")


def test_ctf_single_token(rng):
    module = Ctf(8, 4, rng)
    r = np.random.default_rng(1)
    f_spe, f_spa, f_vit = (r.normal(size=(1, 8)) for _ in range(3))
    with double_precision():
        for p in module.parameters():
            p.data = p.data.astype(np.float64)
        out = module(Tensor(f_spa), Tensor(f_spe), Tensor(f_vit)).data
    fused = f_spa * np_weight_net(f_spe, module.gate) + f_spa
    # one key: attention returns its value projection regardless of the query
    value = lin(np_ln(fused, module.norm_kv.gain.data, module.norm_kv.bias.data), module.attn.v)
    h = lin(value, module.attn.out) + fused
    ffn = lin(np_gelu(lin(np_ln(h, module.norm_ffn.gain.data, module.norm_ffn.bias.data),
                          module.fc1)), module.fc2)
    np.testing.assert_allclose(out, h + ffn, rtol=1e-10)


def test_ctf_two_token_toy_step_by_step(rng):
    module = Ctf(8, 4, rng)
    r = np.random.default_rng(2)
    f_spe, f_spa, f_vit = (r.normal(size=(2, 8)) for _ in range(3))
    with double_precision():
        for p in module.parameters():
            p.data = p.data.astype(np.float64)
        out = ctf(module, Tensor(f_spe), Tensor(f_spa), Tensor(f_vit), "spe").data
    # branch "spe": the spectral tokens are gated by the spatial ones
    fused = f_spe * np_weight_net(f_spa, module.gate) + f_spe
    q = np_ln(f_vit, module.norm_q.gain.data, module.norm_q.bias.data)
    kv = np_ln(fused, module.norm_kv.gain.data, module.norm_kv.bias.data)
    h = np_mha(q, kv, module.attn, 4) + fused
    ffn = lin(np_gelu(lin(np_ln(h, module.norm_ffn.gain.data, module.norm_ffn.bias.data),
                          module.fc1)), module.fc2)
    np.testing.assert_allclose(out, h + ffn, rtol=1e-10)


def test_cti_gate_cases(rng):
    module = Cti(8, 4, rng)
    r = np.random.default_rng(3)
    f_spe, f_spa, f_vit = (r.normal(size=(1, 5, 8)) for _ in range(3))
    assert module.scale.data[0] == 0.0
    out = module(Tensor(f_spe), Tensor(f_spa), Tensor(f_vit)).data
    np.testing.assert_array_equal(out, f_vit.astype(np.float32))
    module.scale.data[0] = 1.0
    _zero(module.attn.out)
    out = module(Tensor(f_spe), Tensor(f_spa), Tensor(f_vit)).data
    np.testing.assert_array_equal(out, f_vit.astype(np.float32))


def test_cti_half_gate_hand_attention(rng):
    module = Cti(8, 4, rng)
    r = np.random.default_rng(4)
    f_spe, f_spa, f_vit = (r.normal(size=(3, 8)) for _ in range(3))
    with double_precision():
        for p in module.parameters():
            p.data = p.data.astype(np.float64)
        module.scale.data[0] = 0.5
        out = module(Tensor(f_spe), Tensor(f_spa), Tensor(f_vit)).data
    fus = lin(np.concatenate([f_spa, f_spe], -1), module.fuse)
    q = np_ln(fus, module.norm_q.gain.data, module.norm_q.bias.data)
    kv = np_ln(f_vit, module.norm_kv.gain.data, module.norm_kv.bias.data)
    np.testing.assert_allclose(out, 0.5 * np_mha(q, kv, module.attn, 4) + f_vit, rtol=1e-10)


def test_cti_token_mismatch(rng):
    module = Cti(8, 4, rng)
    with pytest.raises(ValueError):
        module(Tensor(np.zeros((1, 3, 8))), Tensor(np.zeros((1, 3, 8))), Tensor(np.zeros((1, 4, 8))))


# ---------------------------------------------------------------- full MFIN

def test_adapter_count_and_divisibility(rng):
    assert len(Mfin(4, 6, rng, depth=8, interval=4).adapters) == 2
    with pytest.raises(ValueError):
        Mfin(4, 6, rng, depth=8, interval=3)


def test_forward_requires_pretrained_vit(rng):
    model = Mfin(4, 6, rng, vit_dim=16, depth=2, heads=4, adapter_dim=8, interval=2, pos_grid=4)
    with pytest.raises(MissingVitWeightsError):
        mfin_forward(model, *tiny_inputs())


def test_init_identity_and_prior_passthrough(rng):
    model = tiny_mfin(rng)
    a, b, q, m_up = tiny_inputs()
    out = mfin_forward(model, a, b, q, m_up, return_stream=True)
    ref = model.vit.stream(q)
    assert len(out.stream) == len(ref) == 4
    for x, y in zip(out.stream, ref):
        assert x.data.tobytes() == y.data.tobytes()
    np.testing.assert_array_equal(out.A_hat.data, a.data.astype(np.float32))
    np.testing.assert_array_equal(out.B_hat.data, b.data.astype(np.float32))
    assert out.O2.shape == (1, 16, 16, 4)


def test_no_cti_never_touches_stream(rng):
    model = tiny_mfin(rng, use_cti=False)
    for adapter in model.adapters:
        adapter.cti.scale.data[0] = 0.7
        noise = np.random.default_rng(0).normal(size=adapter.up.weight.shape)
        adapter.up.weight.data = noise.astype(np.float32)
    a, b, q, m_up = tiny_inputs(seed=3)
    out = model(a, b, q, m_up, return_stream=True)
    for x, y in zip(out.stream, model.vit.stream(q)):
        assert x.data.tobytes() == y.data.tobytes()


def test_injection_changes_stream_once_gates_open(rng):
    model = tiny_mfin(rng)
    model.adapters[0].cti.scale.data[0] = 1.0
    model.adapters[0].up.weight.data[...] = 0.1
    a, b, q, m_up = tiny_inputs()
    out = model(a, b, q, m_up, return_stream=True)
    ref = model.vit.stream(q)
    assert np.array_equal(out.stream[1].data, ref[1].data)  # before the first adapter
    assert not np.allclose(out.stream[2].data, ref[2].data)


def test_no_ctf_passes_branch_tokens(rng):
    model = tiny_mfin(rng, use_ctf=False)
    model.untok_a.weight.data = np.random.default_rng(0).normal(
        size=model.untok_a.weight.shape).astype(np.float32)
    a, b, q, m_up = tiny_inputs()
    f_spe, _ = model.tokenize_priors(a, b)
    out = model(a, b, q, m_up)
    expected = a.data + (f_spe.data @ model.untok_a.weight.data).reshape(a.shape)
    np.testing.assert_allclose(out.A_hat.data, expected, rtol=1e-5, atol=1e-6)


def test_tail_residual_flag(rng):
    a, b, q, m_up = tiny_inputs()
    with_res = tiny_mfin(np.random.default_rng(0))(a, b, q, m_up).O2.data
    without = tiny_mfin(np.random.default_rng(0), tail_residual=False)(a, b, q).O2.data
    np.testing.assert_allclose(with_res, without + m_up.data.astype(np.float32), atol=1e-6)


def test_token_alignment_for_several_sizes(rng):
    model = tiny_mfin(rng)
    for h in (2, 4, 8):
        a, b, q, m_up = tiny_inputs(h)
        f_spe, f_spa = model.tokenize_priors(a, b)
        assert f_spe.shape[1] == f_spa.shape[1] == model.vit.embed_tokens(q).shape[1] == h * h


def test_stage2_graph_grad_check():
    from panadapter.pipeline.gradsuite import TINY_CONFIG, tiny_model

    cfg = TINY_CONFIG.replace(lrms_size=4)
    with double_precision():
        model = tiny_model(cfg, stage=2)
        r = np.random.default_rng(0)
        a = Tensor(r.normal(size=(1, 4, 4, 8)))
        b = Tensor(r.normal(size=(1, 16, 16, 8)))
        q = Tensor(r.random((1, 16, 16, 5)))
        m_up = Tensor(r.random((1, 16, 16, 4)))
        params = [p for p in model.mfin.parameters() if p.trainable]
        err = grad_check(lambda a_, b_, *_: model.mfin(a_, b_, q, m_up).O2, [a, b] + params,
                         max_checks=2)
    assert err < 1e-3


# ---------------------------------------------------------------- pretraining

def test_pretrain_vit_zero_steps(rng):
    vit = VitBackbone(5, rng, dim=16, depth=2, heads=4, pos_grid=4)
    before = {k: v.copy() for k, v in vit.state_dict().items()}
    assert pretrain_vit(vit, seed=0, steps=0, bands=4, size=16) == []
    assert all(vit.state_dict()[k].tobytes() == v.tobytes() for k, v in before.items())
    assert not any(p.trainable for p in vit.parameters())


def test_pretrain_vit_reduces_loss(rng):

    vit = VitBackbone(5, rng, dim=16, depth=2, heads=4, pos_grid=4)
    history = pretrain_vit(vit, seed=0, steps=150, bands=4, size=16, corpus_size=8)
    assert np.mean(history[-20:]) < np.mean(history[:20])
    assert min(history) < history[0]


def test_pretrained_vit_round_trip(rng, tmp_path):
    from panadapter.pipeline.checkpoint import from_parameters, load_checkpoint

    vit = VitBackbone(5, rng, dim=16, depth=2, heads=4, pos_grid=4)
    vit.assign_names()
    pretrain_vit(vit, seed=0, steps=2, bands=4, size=16, corpus_size=4)
    from_parameters(vit.named_parameters(), "pretrain", "x").save(tmp_path / "vit")
    other = VitBackbone(5, np.random.default_rng(9), dim=16, depth=2, heads=4, pos_grid=4)
    other.load_state_dict(load_checkpoint(tmp_path / "vit").tensors)
    q = Tensor(np.random.default_rng(1).random((1, 16, 16, 5)))
    with no_grad():
        assert vit(q).data.tobytes() == other(q).data.tobytes()
