import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from mswtc import micro_nn as nn


def blobs(n=120, channels=2, length=32, gap=1.5, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    x = rng.normal(0, 1, (n, channels, length))
    x += (y[:, None, None] * 2 - 1) * gap
    return x, y


# -- gradient check -------------------------------------------------------


def test_gradient_check_default_tiny_model():
    t0 = time.perf_counter()
    res = nn.gradient_check()
    elapsed = time.perf_counter() - t0
    assert res["max_rel_error"] < 1e-4, res["per_param"]
    assert set(res["per_param"]) == set(nn.PARAM_NAMES)
    assert elapsed < 30


def test_gradient_check_linear_conv_activation():
    cfg = nn.ModelConfig(in_channels=2, in_length=16, conv_channels=(4, 3), conv_activation="linear")
    assert nn.gradient_check(cfg)["max_rel_error"] < 1e-4


def test_gradients_agree_tightly_with_small_step():
    cfg = nn.ModelConfig(in_channels=3, in_length=20, conv_channels=(3, 2), dense_hidden=4, seed=5)
    params = nn.init_params(cfg, np.float64)
    rng = np.random.default_rng(0)
    for k in ("conv1.b", "conv2.b", "dense1.b", "bn1.beta", "bn2.beta"):
        params[k] = rng.normal(0, 0.5, params[k].shape)
    x = rng.standard_normal((6, 3, 20))
    y = np.array([0, 1, 1, 0, 1, 0])
    num, kinks = nn.numerical_gradients(params, cfg, x, y, eps=1e-6, return_kinks=True)
    assert kinks == 0
    ana = nn.analytic_gradients(params, cfg, x, y)
    for k in nn.PARAM_NAMES:
        assert nn.relative_error(ana[k], num[k]) < 1e-6, k


def test_tiny_model_spec_length_too_short():
    with pytest.raises(nn.ModelError):
        nn.ModelConfig(in_channels=2, in_length=8, conv_channels=(4, 3))


# -- loss, optimizer, layers ----------------------------------------------


def test_bce_matches_formula_and_clamps():
    p = np.array([0.9, 0.2, 0.5])
    y = np.array([1, 0, 1])
    ref = -np.mean([np.log(0.9), np.log(0.8), np.log(0.5)])
    assert nn.bce_loss(p, y) == pytest.approx(ref, rel=1e-14)
    assert nn.bce_loss(np.array([0.0, 1.0]), np.array([1, 0])) == pytest.approx(-np.log(1e-7))


def test_sigmoid_stable():
    z = np.array([-1000.0, -30.0, 0.0, 30.0, 1000.0])
    s = nn._sigmoid(z)
    assert np.all(np.isfinite(s))
    assert s[2] == 0.5 and s[0] == 0.0 and s[-1] == 1.0
    assert np.allclose(s[1:4], 1 / (1 + np.exp(-z[1:4])))


def test_adam_two_steps_by_hand():
    cfg = nn.TrainConfig(lr=0.1)
    params = {"w": np.array([1.0, -2.0])}
    state = nn.AdamState()
    g1, g2 = np.array([0.5, -1.0]), np.array([0.1, 2.0])
    nn.adam_step(params, {"w": g1.copy()}, state, cfg)
    nn.adam_step(params, {"w": g2.copy()}, state, cfg)
    m, v, w = 0.0, 0.0, np.array([1.0, -2.0])
    for t, g in enumerate((g1, g2), start=1):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w = w - 0.1 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    assert np.allclose(params["w"], w, rtol=1e-14)
    assert state.step == 2


def test_conv_matches_direct_sum():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 7, 3))
    W = rng.standard_normal((3, 3, 4))
    b = rng.standard_normal(4)
    z, _ = nn._conv(x, W, b)
    ref = np.zeros((2, 5, 4))
    for n in range(2):
        for t in range(5):
            for f in range(4):
                ref[n, t, f] = b[f] + sum(W[k, c, f] * x[n, t + k, c] for k in range(3) for c in range(3))
    assert np.allclose(z, ref, rtol=1e-12)


def test_pool_drops_odd_tail():
    x = np.arange(10, dtype=float).reshape(1, 5, 2)
    y, _ = nn._pool(x)
    assert y.shape == (1, 2, 2)
    assert np.array_equal(y[0], [[2, 3], [6, 7]])


def test_dropout_mask_inverted_scaling():
    m = nn._dropout_mask(np.random.default_rng(0), (200000,), 0.5, np.float64)
    assert set(np.unique(m)) == {0.0, 2.0}
    assert abs(m.mean() - 1) < 0.01


# -- forward-pass properties ----------------------------------------------


def test_eval_equals_train_after_stats_sync():
    cfg = nn.ModelConfig(in_channels=2, in_length=40, conv_channels=(6, 4), seed=1)
    params = nn.init_params(cfg, np.float64)
    x = np.random.default_rng(2).standard_normal((16, 2, 40))
    nn.sync_running_stats(params, cfg, x)
    p_eval = nn.forward(params, cfg, x, mode="eval")
    p_train, _ = nn.forward(params, cfg, x, mode="train", dropout=False)
    assert np.allclose(p_eval, p_train, rtol=1e-12, atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 16))
def test_eval_permutation_equivariant(seed):
    cfg = nn.ModelConfig(in_channels=1, in_length=30, conv_channels=(4, 3), seed=seed)
    params = nn.init_params(cfg, np.float64)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((9, 1, 30))
    perm = rng.permutation(9)
    a = nn.forward(params, cfg, x, mode="eval")
    b = nn.forward(params, cfg, x[perm], mode="eval")
    assert np.allclose(a[perm], b, rtol=1e-12, atol=0)
    assert np.all((a > 0) & (a < 1))


def test_shape_mismatch_rejected():
    cfg = nn.ModelConfig(in_channels=2, in_length=30)
    params = nn.init_params(cfg)
    with pytest.raises(nn.ModelError):
        nn.forward(params, cfg, np.zeros((3, 2, 31)))


def test_stale_cache_rejected():
    cfg = nn.ModelConfig(in_channels=1, in_length=30, conv_channels=(4, 3))
    params = nn.init_params(cfg, np.float64)
    _, cache = nn.forward(params, cfg, np.zeros((4, 1, 30)), mode="train", dropout=False)
    with pytest.raises(nn.ModelError):
        nn.backward(params, cfg, cache, np.zeros(5))


# -- training -------------------------------------------------------------


def logistic_regression_accuracy(x, y):
    """Independent check that the channel means are linearly separable."""
    feats = np.c_[x.mean(axis=2), np.ones(len(x))]

    def loss(w):
        z = feats @ w
        return np.mean(np.logaddexp(0, z) - y * z) + 1e-6 * w @ w

    w = minimize(loss, np.zeros(feats.shape[1]), method="BFGS").x
    return np.mean(((feats @ w) > 0) == y)


def test_blob_task_learned_within_20_epochs():
    x, y = blobs()
    assert logistic_regression_accuracy(x, y) == 1.0
    log = []
    cfg = nn.ModelConfig(in_channels=2, in_length=32, conv_channels=(8, 4))
    nn.train(cfg, nn.TrainConfig(epochs=20, batch_size=16), x, y, log=log)
    assert log[-1][2] == 1.0


def test_blob_loss_decreases_over_50_epochs():
    x, y = blobs(gap=0.6, seed=3)
    cfg = nn.ModelConfig(in_channels=2, in_length=32, conv_channels=(8, 4))
    model, curve = nn.train(cfg, nn.TrainConfig(epochs=50, batch_size=16), x, y)
    assert len(curve) == 50 and curve[49] <= curve[0]
    assert np.mean(model.predict(x) == y) > 0.9


def test_training_deterministic():
    x, y = blobs(n=60)
    cfg = nn.ModelConfig(in_channels=2, in_length=32, conv_channels=(4, 3), seed=9)
    tc = nn.TrainConfig(epochs=3, seed=4)
    a, ca = nn.train(cfg, tc, x, y)
    b, cb = nn.train(cfg, tc, x, y)
    assert ca == cb
    for k in a.params:
        assert a.params[k].tobytes() == b.params[k].tobytes()


def test_train_rejects_single_class():
    x, _ = blobs(n=10)
    with pytest.raises(nn.ModelError):
        nn.train(nn.ModelConfig(2, 32), nn.TrainConfig(epochs=1), x, np.zeros(10, int))


def test_training_log_csv(tmp_path):
    x, y = blobs(n=40)
    log = []
    nn.train(nn.ModelConfig(2, 32, conv_channels=(4, 3)), nn.TrainConfig(epochs=2), x, y, log=log)
    path = tmp_path / "log.csv"
    nn.write_training_log(log, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,mean_loss,train_acc" and len(lines) == 3


def test_predict_threshold_inclusive():
    x, y = blobs(n=20)
    model, _ = nn.train(nn.ModelConfig(2, 32, conv_channels=(4, 3)), nn.TrainConfig(epochs=1), x, y)
    p = model.predict_proba(x)
    assert np.array_equal(nn.predict(model, x, threshold=float(p[0]))[0:1], [1])


# -- serialization --------------------------------------------------------


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    x, y = blobs(n=40)
    model, _ = nn.train(nn.ModelConfig(2, 32, conv_channels=(4, 3)), nn.TrainConfig(epochs=2), x, y)
    path = tmp_path_factory.mktemp("m") / "model.msnn"
    nn.save_model(model, path, adam_state=model.adam_state)
    return model, path, x


def test_round_trip_bit_identical(trained):
    model, path, x = trained
    back, state = nn.load_model(path, with_adam=True)
    assert back.config == model.config
    for k in model.params:
        assert back.params[k].tobytes() == model.params[k].tobytes()
    assert np.array_equal(back.predict_proba(x), model.predict_proba(x))
    assert state.step == model.adam_state.step
    for k in state.m:
        assert np.array_equal(state.m[k], model.adam_state.m[k])


@pytest.mark.parametrize("damage", ["magic", "truncate", "flip"])
def test_damaged_file_rejected(trained, tmp_path, damage):
    _, path, _ = trained
    raw = bytearray(path.read_bytes())
    if damage == "magic":
        raw[0:2] = b"XX"
    elif damage == "truncate":
        raw = raw[: len(raw) // 2]
    else:
        raw[len(raw) // 2] ^= 0xFF
    bad = tmp_path / "bad.msnn"
    bad.write_bytes(bytes(raw))
    with pytest.raises(nn.ModelError):
        nn.load_model(bad)
