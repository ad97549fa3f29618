import math

import numpy as np
import pytest

from panadapter.metrics import (
    FullReport,
    ReducedReport,
    cd_conj,
    cd_mul,
    d_lambda,
    d_s,
    ergas,
    psnr,
    q2n,
    qnr,
    sam,
    uiqi,
)


def rand(shape, seed=0):
    return np.random.default_rng(seed).uniform(0.1, 0.9, size=shape)


def test_psnr_cases():
    x = rand((8, 8, 3))
    assert psnr(x, x) == math.inf
    assert psnr(np.full((4, 4, 1), 100.0), np.full((4, 4, 1), 110.0), peak=255) == pytest.approx(
        20 * math.log10(255 / 10), abs=1e-9)
    got = psnr(np.full((4, 4, 1), 100.0), np.full((4, 4, 1), 110.0), peak=255)
    assert got == pytest.approx(28.13, abs=0.01)
    assert psnr(x, x + 0.1) == pytest.approx(20.0, abs=1e-9)
    with pytest.raises(ValueError):
        psnr(x, x[:4])
    with pytest.raises(ValueError):
        psnr(x, x, peak=0)


def test_sam_cases():
    x = rand((6, 6, 4))
    assert sam(x, x) == pytest.approx(0.0, abs=1e-6)
    assert sam(np.array([[[1.0, 0.0]]]), np.array([[[1.0, 1.0]]])) == pytest.approx(45.0, abs=1e-12)
    assert sam(x, 3 * x) == pytest.approx(0.0, abs=1e-6)
    assert sam(x, rand((6, 6, 4), 1)) == pytest.approx(sam(rand((6, 6, 4), 1), x))


def test_sam_zero_vectors_contribute_zero():
    x = np.array([[[0.0, 0.0], [1.0, 0.0]]])
    y = np.array([[[1.0, 2.0], [1.0, 1.0]]])
    assert sam(x, y) == pytest.approx(45.0 / 2)


def test_ergas_cases():
    x = rand((8, 8, 4))
    assert ergas(x, x) == 0.0
    ref = np.full((4, 4, 1), 100.0)
    assert ergas(ref + 4.0, ref, ratio=4) == pytest.approx(1.0, abs=1e-6)
    ref2 = np.full((4, 4, 2), 100.0)
    est = ref2.copy()
    est[..., 0] += 4.0
    assert ergas(est, ref2, 4) == pytest.approx(25 * math.sqrt((0.04 ** 2) / 2), abs=1e-12)


def test_ergas_zero_mean_bands():
    ref = np.zeros((4, 4, 2))
    ref[..., 1] = 100.0
    with pytest.warns(RuntimeWarning):
        assert ergas(ref + np.array([0.0, 4.0]), ref, 4) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ergas(np.ones((4, 4, 1)), np.zeros((4, 4, 1)))


def uiqi_three_factor(x, y):
    """Single-window UIQI written as correlation x luminance x contrast."""
    mx, my = x.mean(), y.mean()
    sx, sy = x.std(), y.std()
    sxy = ((x - mx) * (y - my)).mean()
    return (sxy / (sx * sy)) * (2 * mx * my / (mx ** 2 + my ** 2)) * (2 * sx * sy / (sx ** 2 + sy ** 2))


def test_uiqi_identity_symmetry_and_formula():
    x, y = rand((16, 16), 1), rand((16, 16), 2)
    assert uiqi(x, x, 8) == pytest.approx(1.0, abs=1e-12)
    assert uiqi(x, y, 8) == pytest.approx(uiqi(y, x, 8), abs=1e-15)
    assert uiqi(x, y, 16) == pytest.approx(uiqi_three_factor(x, y), abs=1e-12)
    blocks = [uiqi_three_factor(x[r:r + 8, c:c + 8], y[r:r + 8, c:c + 8])
              for r in (0, 8) for c in (0, 8)]
    assert uiqi(x, y, 8) == pytest.approx(np.mean(blocks), abs=1e-12)


def test_uiqi_sliding_mode():
    x, y = rand((6, 6), 3), rand((6, 6), 4)
    vals = [uiqi_three_factor(x[r:r + 4, c:c + 4], y[r:r + 4, c:c + 4])
            for r in range(3) for c in range(3)]
    assert uiqi(x, y, 4, stride=1) == pytest.approx(np.mean(vals), abs=1e-12)


def test_uiqi_degenerate_windows():
    c = np.full((4, 4), 0.3)
    assert uiqi(c, c, 4) == 1.0
    assert uiqi(c, np.full((4, 4), 0.6), 4) == pytest.approx(2 * 0.3 * 0.6 / (0.09 + 0.36))
    assert uiqi(np.zeros((4, 4)), np.zeros((4, 4)), 4) == 1.0


def test_uiqi_window_larger_than_image():
    with pytest.raises(ValueError):
        uiqi(np.ones((4, 4)), np.ones((4, 4)), 8)


def test_bounds_on_random_pairs():
    for seed in range(5):
        x, y = rand((16, 16, 4), seed), rand((16, 16, 4), seed + 10)
        assert -1.0 <= uiqi(x[..., 0], y[..., 0], 8) <= 1.0
        assert -1.0 <= q2n(x, y, 8) <= 1.0


def test_q2n_identity_and_single_band():
    x = rand((16, 16, 4))
    assert q2n(x, x, 8) == pytest.approx(1.0, abs=1e-9)
    x8 = rand((16, 16, 8), 5)
    assert q2n(x8, x8, 16) == pytest.approx(1.0, abs=1e-9)
    a, b = rand((16, 16, 1), 1), rand((16, 16, 1), 2)
    assert q2n(a, b, 8) == pytest.approx(uiqi(a[..., 0], b[..., 0], 8), abs=1e-9)


def q2n_complex_oracle(x, y):
    """Two-band hypercomplex index with Python complex numbers, one window."""
    zx = [complex(*v) for v in x.reshape(-1, 2)]
    zy = [complex(*v) for v in y.reshape(-1, 2)]
    n = len(zx)
    mx, my = sum(zx) / n, sum(zy) / n
    cov = sum((a - mx) * (b - my).conjugate() for a, b in zip(zx, zy)) / n
    vx = sum(abs(a - mx) ** 2 for a in zx) / n
    vy = sum(abs(b - my) ** 2 for b in zy) / n
    return 4 * abs(cov) * abs(mx) * abs(my) / ((vx + vy) * (abs(mx) ** 2 + abs(my) ** 2))


def test_q2n_two_band_toy_against_complex_arithmetic():
    x, y = rand((8, 8, 2), 7), rand((8, 8, 2), 8)
    assert q2n(x, y, 8) == pytest.approx(q2n_complex_oracle(x, y), abs=1e-12)
    y2 = 0.7 * x + 0.2 * rand((8, 8, 2), 9)
    assert q2n(x, y2, 8) == pytest.approx(q2n_complex_oracle(x, y2), abs=1e-12)
    big_x, big_y = rand((16, 16, 2), 1), rand((16, 16, 2), 2)
    tiles = [q2n_complex_oracle(big_x[r:r + 8, c:c + 8], big_y[r:r + 8, c:c + 8])
             for r in (0, 8) for c in (0, 8)]
    assert q2n(big_x, big_y, 8) == pytest.approx(np.mean(tiles), abs=1e-12)


def test_q2n_pads_three_bands():
    x, y = rand((8, 8, 3), 1), rand((8, 8, 3), 2)
    pad = np.zeros((8, 8, 1))
    assert q2n(x, y, 8) == q2n(np.concatenate([x, pad], -1), np.concatenate([y, pad], -1), 8)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_cayley_dickson_is_a_composition_algebra(n):
    r = np.random.default_rng(n)
    a, b = r.normal(size=(5, n)), r.normal(size=(5, n))
    norm = lambda v: np.sqrt(np.sum(v * v, axis=-1))  # noqa: E731
    np.testing.assert_allclose(norm(cd_mul(a, b)), norm(a) * norm(b), rtol=1e-12)
    za = cd_mul(a, cd_conj(a))
    np.testing.assert_allclose(za[:, 0], norm(a) ** 2, rtol=1e-12)
    np.testing.assert_allclose(za[:, 1:], 0.0, atol=1e-12)


def test_d_lambda_zero_for_replicated_ms():
    ms = rand((8, 8, 4))
    up = np.kron(ms, np.ones((4, 4, 1)))
    assert d_lambda(up, ms, window=32) == pytest.approx(0.0, abs=1e-6)


def test_d_lambda_two_band_hand_sum():
    ms_hat, ms = rand((16, 16, 2), 1), rand((4, 4, 2), 2)
    hi = uiqi_three_factor(ms_hat[..., 0], ms_hat[..., 1])
    lo = uiqi_three_factor(ms[..., 0], ms[..., 1])
    # both ordered pairs (0,1) and (1,0) contribute the same term; N(N-1) = 2
    expected = (abs(hi - lo) + abs(hi - lo)) / 2
    assert d_lambda(ms_hat, ms, window=16, ratio=4) == pytest.approx(expected, abs=1e-12)
    p2 = math.sqrt((2 * abs(hi - lo) ** 2) / 2)
    assert d_lambda(ms_hat, ms, p=2, window=16, ratio=4) == pytest.approx(p2, abs=1e-12)


def test_d_s_and_qnr_ideal():
    ms = rand((8, 8, 4))
    pan_lr = rand((8, 8, 1), 3)
    up = np.kron(ms, np.ones((4, 4, 1)))
    pan = np.kron(pan_lr, np.ones((4, 4, 1)))
    ds = d_s(up, pan, ms, pan_lr, window=32)
    dl = d_lambda(up, ms, window=32)
    assert ds == pytest.approx(0.0, abs=1e-9)
    assert qnr(dl, ds) == pytest.approx(1.0, abs=1e-9)
    assert qnr(0.0, 0.0) == 1.0


def test_no_reference_bounds_and_qnr_product():
    ms = rand((8, 8, 4), 1)
    pred = rand((32, 32, 4), 2)
    pan = rand((32, 32, 1), 3)
    dl, ds = d_lambda(pred, ms, window=32), d_s(pred, pan, ms, window=32)
    assert 0.0 <= dl <= 1.0 and 0.0 <= ds <= 1.0
    assert qnr(dl, ds) == pytest.approx((1 - dl) * (1 - ds), abs=1e-12)
    with pytest.raises(ValueError):
        d_lambda(pred[..., :3], ms)


def test_report_aggregation_and_files(tmp_path):
    report = ReducedReport()
    report.add("a", psnr=30.0, sam=2.0, ergas=1.0, q2n=0.9)
    report.add("b", psnr=math.inf, sam=4.0, ergas=3.0, q2n=0.7)
    assert report.std()["sam"] == pytest.approx(1.0)  # population std
    csv_path, json_path = report.write(tmp_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "id,psnr,sam,ergas,q2n"
    assert len(lines) == 1 + 2 + 1
    assert lines[-1].startswith("mean±std,")
    assert "inf" in lines[2]
    import json
    data = json.loads(json_path.read_text())
    assert data["samples"][1]["psnr"] == "inf"
    assert data["mean"]["sam"] == pytest.approx(3.0)
    assert data["std"]["psnr"] == "nan"
    assert FullReport().columns == ("d_lambda", "d_s", "qnr")
