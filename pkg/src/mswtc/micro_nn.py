"""A small 1-D CNN written directly against numpy.

Layer stack (input is ``n x channels x length``)::

    Conv1D(k=3, valid) -> BatchNorm -> MaxPool(2)
    Conv1D(k=3, valid) -> BatchNorm -> Dropout -> MaxPool(2)
    Flatten -> Dropout -> Dense(10, ReLU) -> Dense(1, sigmoid)

Forward and backward passes are explicit so the gradients can be checked
against finite differences. Training minimises mean binary cross-entropy
with Adam.
"""
from __future__ import annotations

import io
import json
import struct
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from ._random import substream

PROB_CLAMP = 1e-7
BN_EPS = 1e-3


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    in_channels: int
    in_length: int
    conv_channels: tuple = (64, 32)
    kernel: int = 3
    pool: int = 2
    dense_hidden: int = 10
    dropout_conv: float = 0.2
    dropout_dense: float = 0.5
    conv_activation: str = "relu"
    bn_momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        if self.kernel != 3 or self.pool != 2:
            raise ModelError("only kernel 3 / pool 2 are supported")
        if self.conv_activation not in ("relu", "linear"):
            raise ModelError(f"unknown conv_activation {self.conv_activation!r}")
        if self.final_length < 1:
            raise ModelError(
                f"in_length {self.in_length} too short for two conv/pool stages"
            )

    def lengths(self):
        l1 = self.in_length - 2
        p1 = l1 // 2
        l2 = p1 - 2
        p2 = l2 // 2
        return l1, p1, l2, p2

    @property
    def final_length(self):
        l1 = self.in_length - 2
        l2 = l1 // 2 - 2
        return l2 // 2 if l2 >= 1 else 0

    @property
    def flat_size(self):
        return self.final_length * self.conv_channels[1]


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ModelError("lr > 0, epochs >= 1 and batch_size >= 1 are required")


@dataclass
class InputNormalizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x):
        x = np.asarray(x, dtype=np.float64)
        mean = x.mean(axis=(0, 2))
        std = np.maximum(x.std(axis=(0, 2)), 1e-8)
        return cls(mean.astype(np.float32), std.astype(np.float32))

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return (x - self.mean[None, :, None]) / self.std[None, :, None]


PARAM_NAMES = (
    "conv1.W", "conv1.b", "bn1.gamma", "bn1.beta",
    "conv2.W", "conv2.b", "bn2.gamma", "bn2.beta",
    "dense1.W", "dense1.b", "dense2.W", "dense2.b",
)
STATE_NAMES = ("bn1.running_mean", "bn1.running_var", "bn2.running_mean", "bn2.running_var")


def _glorot(rng, fan_in, fan_out, shape):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape)


def init_params(cfg, dtype=np.float32):
    """Glorot-uniform weights, zero biases, unit BN scale, running var 1."""
    rng = substream(cfg.seed, "init")
    c_in = cfg.in_channels
    f1, f2 = cfg.conv_channels
    h = cfg.dense_hidden
    p = {
        "conv1.W": _glorot(rng, 3 * c_in, 3 * f1, (3, c_in, f1)),
        "conv1.b": np.zeros(f1),
        "bn1.gamma": np.ones(f1),
        "bn1.beta": np.zeros(f1),
        "conv2.W": _glorot(rng, 3 * f1, 3 * f2, (3, f1, f2)),
        "conv2.b": np.zeros(f2),
        "bn2.gamma": np.ones(f2),
        "bn2.beta": np.zeros(f2),
        "dense1.W": _glorot(rng, cfg.flat_size, h, (cfg.flat_size, h)),
        "dense1.b": np.zeros(h),
        "dense2.W": _glorot(rng, h, 1, (h, 1)),
        "dense2.b": np.zeros(1),
        "bn1.running_mean": np.zeros(f1),
        "bn1.running_var": np.ones(f1),
        "bn2.running_mean": np.zeros(f2),
        "bn2.running_var": np.ones(f2),
    }
    return {k: v.astype(dtype) for k, v in p.items()}


# --------------------------------------------------------------------------
# layer kernels; activations are laid out (n, length, channels)


def _conv(x, W, b):
    lo = x.shape[1] - 2
    cols = np.concatenate([x[:, 0:lo], x[:, 1:lo + 1], x[:, 2:lo + 2]], axis=2)
    return cols @ W.reshape(-1, W.shape[2]) + b, cols


def _conv_backward(dz, cols, W, in_shape):
    n, lo, f = dz.shape
    dW = (cols.reshape(-1, cols.shape[2]).T @ dz.reshape(-1, f)).reshape(W.shape)
    db = dz.sum(axis=(0, 1))
    dcols = (dz @ W.reshape(-1, f).T).reshape(n, lo, 3, W.shape[1])
    dx = np.zeros(in_shape, dtype=dz.dtype)
    for k in range(3):
        dx[:, k:k + lo] += dcols[:, :, k]
    return dx, dW, db


def _pool(x):
    # pairwise max; ``second`` marks where the odd element won (ties go to the first)
    lo = x.shape[1] // 2
    a, b = x[:, 0:2 * lo:2], x[:, 1:2 * lo:2]
    second = b > a
    return np.where(second, b, a), second


def _pool_backward(dy, second, in_shape):
    lo = dy.shape[1]
    dx = np.zeros(in_shape, dtype=dy.dtype)
    dx[:, 0:2 * lo:2] = np.where(second, 0, dy)
    dx[:, 1:2 * lo:2] = np.where(second, dy, 0)
    return dx


def _bn_train(x, gamma, beta):
    mean = x.mean(axis=(0, 1))
    var = x.var(axis=(0, 1))
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean) * inv
    return gamma * xhat + beta, (xhat, inv, gamma), mean, var


def _bn_backward(dy, cache):
    xhat, inv, gamma = cache
    m = dy.shape[0] * dy.shape[1]
    dgamma = (dy * xhat).sum(axis=(0, 1))
    dbeta = dy.sum(axis=(0, 1))
    dxhat = dy * gamma
    dx = inv / m * (m * dxhat - dxhat.sum(axis=(0, 1)) - xhat * (dxhat * xhat).sum(axis=(0, 1)))
    return dx, dgamma, dbeta


def _dropout_mask(rng, shape, rate, dtype):
    if rate <= 0:
        return None
    keep = 1.0 - rate
    return ((rng.random(shape) < keep) / keep).astype(dtype)


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def forward(params, cfg, batch, mode="eval", rng=None, dropout=True, update_stats=False):
    """Run the network on ``batch`` (n x channels x length).

    In ``"train"`` mode batch-norm uses batch statistics and, when ``dropout``
    is on, inverted dropout masks are drawn from ``rng``. Train mode returns
    ``(probabilities, cache)`` for :func:`backward`; eval mode returns the
    probabilities, shape (n, 1).
    """
    batch = np.asarray(batch)
    if batch.ndim != 3 or batch.shape[1:] != (cfg.in_channels, cfg.in_length):
        raise ModelError(
            f"batch shape {batch.shape[1:]} does not match ({cfg.in_channels}, {cfg.in_length})"
        )
    dtype = params["conv1.W"].dtype
    x = np.ascontiguousarray(batch.transpose(0, 2, 1), dtype=dtype)
    train = mode == "train"
    if train and dropout and rng is None:
        raise ModelError("train mode with dropout needs an rng")
    relu_conv = cfg.conv_activation == "relu"
    cache = {"x_shape": x.shape}

    def conv_block(h, i):
        z, cols = _conv(h, params[f"conv{i}.W"], params[f"conv{i}.b"])
        a = np.maximum(z, 0) if relu_conv else z
        g, bta = params[f"bn{i}.gamma"], params[f"bn{i}.beta"]
        if train:
            y, bcache, mean, var = _bn_train(a, g, bta)
            if update_stats:
                mom = cfg.bn_momentum
                rm, rv = params[f"bn{i}.running_mean"], params[f"bn{i}.running_var"]
                rm *= mom
                rm += (1 - mom) * mean
                rv *= mom
                rv += (1 - mom) * var
            cache[f"bn{i}"] = bcache
        else:
            rm, rv = params[f"bn{i}.running_mean"], params[f"bn{i}.running_var"]
            y = g * (a - rm) / np.sqrt(rv + BN_EPS) + bta
        cache[f"conv{i}"] = (cols, h.shape, z)
        return y

    y1 = conv_block(x, 1)
    p1, arg1 = _pool(y1)
    y2 = conv_block(p1, 2)
    m2 = _dropout_mask(rng, y2.shape, cfg.dropout_conv, dtype) if train and dropout else None
    if m2 is not None:
        y2 = y2 * m2
    p2, arg2 = _pool(y2)
    flat = p2.reshape(p2.shape[0], -1)
    mf = _dropout_mask(rng, flat.shape, cfg.dropout_dense, dtype) if train and dropout else None
    if mf is not None:
        flat = flat * mf
    z3 = flat @ params["dense1.W"] + params["dense1.b"]
    a3 = np.maximum(z3, 0)
    logit = a3 @ params["dense2.W"] + params["dense2.b"]
    prob = _sigmoid(logit)
    if not train:
        return prob
    cache.update(
        pool1=(arg1, y1.shape), pool2=(arg2, y2.shape), m2=m2, mf=mf,
        flat=flat, p2_shape=p2.shape, z3=z3, a3=a3, prob=prob,
    )
    return prob, cache


def bce_loss(predicted, labels):
    """Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(predicted, dtype=np.float64).reshape(-1), PROB_CLAMP, 1 - PROB_CLAMP)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    return float(np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p))))


def backward(params, cfg, cache, labels):
    """Gradients of :func:`bce_loss` for the train-mode forward that made ``cache``."""
    if cache is None or "prob" not in cache:
        raise ModelError("backward needs the cache of a train-mode forward pass")
    prob = cache["prob"]
    y = np.asarray(labels, dtype=prob.dtype).reshape(-1, 1)
    if y.shape[0] != prob.shape[0]:
        raise ModelError("stale cache: label count differs from cached batch")
    n = prob.shape[0]
    inside = (prob > PROB_CLAMP) & (prob < 1 - PROB_CLAMP)
    dlogit = np.where(inside, (prob - y) / n, 0.0).astype(prob.dtype)

    g = {}
    g["dense2.W"] = cache["a3"].T @ dlogit
    g["dense2.b"] = dlogit.sum(axis=0)
    dz3 = (dlogit @ params["dense2.W"].T) * (cache["z3"] > 0)
    g["dense1.W"] = cache["flat"].T @ dz3
    g["dense1.b"] = dz3.sum(axis=0)
    dflat = dz3 @ params["dense1.W"].T
    if cache["mf"] is not None:
        dflat = dflat * cache["mf"]
    dp2 = dflat.reshape(cache["p2_shape"])
    arg2, y2_shape = cache["pool2"]
    dy2 = _pool_backward(dp2, arg2, y2_shape)
    if cache["m2"] is not None:
        dy2 = dy2 * cache["m2"]

    relu_conv = cfg.conv_activation == "relu"

    def conv_block_back(dy, i):
        da, g[f"bn{i}.gamma"], g[f"bn{i}.beta"] = _bn_backward(dy, cache[f"bn{i}"])
        cols, in_shape, z = cache[f"conv{i}"]
        dz = da * (z > 0) if relu_conv else da
        dx, g[f"conv{i}.W"], g[f"conv{i}.b"] = _conv_backward(dz, cols, params[f"conv{i}.W"], in_shape)
        return dx

    dp1 = conv_block_back(dy2, 2)
    arg1, y1_shape = cache["pool1"]
    dy1 = _pool_backward(dp1, arg1, y1_shape)
    conv_block_back(dy1, 1)
    return g


# --------------------------------------------------------------------------
# optimisation


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state, cfg):
    """In-place Adam update with bias correction; returns ``state``."""
    state.step += 1
    t = state.step
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, gr in grads.items():
        p = params[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * gr
        v *= b2
        v += (1 - b2) * gr * gr
        p -= (cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)).astype(p.dtype)
    return state


@dataclass
class Model:
    config: ModelConfig
    params: dict
    normalizer: InputNormalizer
    adam_state: AdamState | None = None
    meta: dict = field(default_factory=dict)

    def predict_proba(self, features):
        x = self.normalizer(features).astype(self.params["conv1.W"].dtype)
        return forward(self.params, self.config, x, mode="eval")[:, 0]

    def predict(self, features, threshold=0.5):
        return predict(self, features, threshold)


def predict(model, features, threshold=0.5):
    """Hard labels: 1 where the predicted probability is >= ``threshold``."""
    return (model.predict_proba(features) >= threshold).astype(np.int64)


def train(model_cfg, train_cfg, features, labels, log=None, dtype=np.float32):
    """Fit the CNN on ``features`` (n x channels x length) with 0/1 ``labels``.

    Returns
    -------
    (Model, list of float)
        The trained model and the per-epoch mean training loss.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    counts = np.bincount(y, minlength=2)
    if counts.size > 2 or counts.min() < 2:
        raise ModelError(f"need at least 2 samples per class, got counts {counts.tolist()}")
    norm = InputNormalizer.fit(x)
    xn = norm(x).astype(dtype)
    params = init_params(model_cfg, dtype)
    state = AdamState()
    drop_rng = substream(train_cfg.seed, "dropout")
    n = y.size
    curve = []
    model = Model(model_cfg, params, norm)
    for epoch in range(train_cfg.epochs):
        order = substream(train_cfg.seed, "shuffle", epoch).permutation(n)
        total = 0.0
        for start in range(0, n, train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            prob, cache = forward(params, model_cfg, xn[idx], mode="train", rng=drop_rng,
                                  update_stats=True)
            total += bce_loss(prob, y[idx]) * idx.size
            grads = backward(params, model_cfg, cache, y[idx])
            adam_step(params, grads, state, train_cfg)
        mean_loss = total / n
        if not np.isfinite(mean_loss):
            raise ModelError(f"non-finite loss at epoch {epoch + 1}")
        curve.append(mean_loss)
        if log is not None:
            acc = float(np.mean((forward(params, model_cfg, xn, mode="eval")[:, 0] >= 0.5) == y))
            log.append((epoch + 1, mean_loss, acc))
    model.adam_state = state
    return model, curve


def write_training_log(rows, path):
    with open(path, "w") as fh:
        fh.write("epoch,mean_loss,train_acc\n")
        for epoch, loss, acc in rows:
            fh.write(f"{int(epoch)},{float(loss)!r},{float(acc)!r}\n")


# --------------------------------------------------------------------------
# serialisation: MSNN1 container


MAGIC = b"MSNN1\x00"
VERSION = 1


def _config_dict(cfg):
    d = asdict(cfg)
    d["conv_channels"] = list(d["conv_channels"])
    return d


def save_model(model, path, adam_state=None, meta=None):
    """Write ``model`` (and optionally Adam state) to a versioned binary file.

    Layout: magic ``MSNN1\\0``, uint32 version, uint64 header length, JSON
    header, raw little-endian array payload, uint32 CRC32 of header+payload.
    ``meta`` is a JSON-serialisable dict stored verbatim in the header.
    """
    arrays = {f"param/{k}": v for k, v in model.params.items()}
    arrays["norm/mean"] = model.normalizer.mean
    arrays["norm/std"] = model.normalizer.std
    if adam_state is not None:
        for k in adam_state.m:
            arrays[f"adam_m/{k}"] = adam_state.m[k]
            arrays[f"adam_v/{k}"] = adam_state.v[k]
    payload = io.BytesIO()
    entries = []
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr)
        a = a.astype(a.dtype.newbyteorder("<"), copy=False)
        entries.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape),
                        "offset": payload.tell(), "nbytes": a.nbytes})
        payload.write(a.tobytes())
    header = json.dumps({
        "model_config": _config_dict(model.config),
        "adam_step": None if adam_state is None else adam_state.step,
        "arrays": entries,
        "meta": model.meta if meta is None else meta,
    }, sort_keys=True).encode("utf-8")
    body = header + payload.getvalue()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(header)))
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def load_model(path, with_adam=False):
    """Read a model written by :func:`save_model`; raises ModelError on any damage."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:len(MAGIC)] != MAGIC:
        raise ModelError(f"{path}: not an MSNN1 model file")
    pos = len(MAGIC)
    if len(raw) < pos + 12 + 4:
        raise ModelError(f"{path}: truncated header")
    version, hlen = struct.unpack_from("<IQ", raw, pos)
    if version != VERSION:
        raise ModelError(f"{path}: unsupported version {version}")
    pos += 12
    body = raw[pos:-4]
    if len(body) < hlen:
        raise ModelError(f"{path}: truncated header")
    (crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise ModelError(f"{path}: checksum mismatch (truncated or corrupted)")
    header = json.loads(body[:hlen].decode("utf-8"))
    payload = body[hlen:]
    arrays = {}
    for e in header["arrays"]:
        end = e["offset"] + e["nbytes"]
        if end > len(payload):
            raise ModelError(f"{path}: truncated payload")
        arrays[e["name"]] = np.frombuffer(payload[e["offset"]:end], dtype=np.dtype(e["dtype"])) \
            .reshape(e["shape"]).copy()
    cfg = ModelConfig(**header["model_config"])
    params = {k.split("/", 1)[1]: v for k, v in arrays.items() if k.startswith("param/")}
    missing = set(PARAM_NAMES + STATE_NAMES) - set(params)
    if missing:
        raise ModelError(f"{path}: missing arrays {sorted(missing)}")
    model = Model(cfg, params, InputNormalizer(arrays["norm/mean"], arrays["norm/std"]),
                  meta=header.get("meta", {}))
    if not with_adam:
        return model
    state = None
    if header["adam_step"] is not None:
        state = AdamState(header["adam_step"],
                          {k[7:]: v for k, v in arrays.items() if k.startswith("adam_m/")},
                          {k[7:]: v for k, v in arrays.items() if k.startswith("adam_v/")})
    return model, state


# --------------------------------------------------------------------------
# verification helpers


def sync_running_stats(params, cfg, batch):
    """Set BN running statistics to the batch statistics of ``batch`` (test hook)."""
    dtype = params["conv1.W"].dtype
    tmp = ModelConfig(**{**_config_dict(cfg), "bn_momentum": 0.0})
    forward(params, tmp, np.asarray(batch, dtype=dtype), mode="train", dropout=False, update_stats=True)


def _pattern(cache):
    # every piecewise decision the forward pass made
    cols1, _, z1 = cache["conv1"]
    cols2, _, z2 = cache["conv2"]
    prob = cache["prob"]
    parts = [z1 > 0, z2 > 0, cache["z3"] > 0, cache["pool1"][0], cache["pool2"][0],
             (prob > PROB_CLAMP) & (prob < 1 - PROB_CLAMP)]
    return b"".join(np.ascontiguousarray(a).tobytes() for a in parts)


def numerical_gradients(params, cfg, batch, labels, eps=1e-3, seed=0, return_kinks=False):
    """Central differences of the train-mode loss for every trainable parameter.

    Dropout masks are redrawn from the same seed for each evaluation, so the
    loss is a deterministic function of the parameters. With
    ``return_kinks`` the number of coordinates whose +/- eps probes changed a
    ReLU, max-pool or clamp decision is returned too; central differences are
    meaningless across such a kink.
    """
    def evaluate():
        prob, cache = forward(params, cfg, batch, mode="train", rng=substream(seed, "gradcheck"))
        return bce_loss(prob, labels), _pattern(cache)

    _, base = evaluate()
    kinks = 0
    grads = {}
    for name in PARAM_NAMES:
        p = params[name]
        gnum = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = gnum.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp, pat_p = evaluate()
            flat[i] = orig - eps
            lm, pat_m = evaluate()
            flat[i] = orig
            gflat[i] = (lp - lm) / (2 * eps)
            kinks += pat_p != base or pat_m != base
        grads[name] = gnum
    return (grads, kinks) if return_kinks else grads


def analytic_gradients(params, cfg, batch, labels, seed=0):
    prob, cache = forward(params, cfg, batch, mode="train", rng=substream(seed, "gradcheck"))
    return backward(params, cfg, cache, labels)


def relative_error(analytic, numeric, floor=1e-8):
    """Largest absolute deviation scaled by the tensor's largest gradient magnitude.

    The scale never drops below ``floor``: a gradient that is identically zero
    (a conv bias feeding straight into batch norm) otherwise compares two
    round-off residues against each other.
    """
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), floor)
    return float(np.abs(analytic - numeric).max() / scale)


def gradient_check(cfg=None, batch_size=5, eps=1e-3, start_seed=0, max_points=50):
    """Compare analytic and central-difference gradients on a tiny float64 model.

    Parameters (including biases and BN affine terms) and inputs are drawn at
    random; points where some +/- eps probe crosses a kink are skipped in
    favour of the next seed. Returns a dict with per-parameter relative errors,
    their maximum, and the seed of the evaluation point.
    """
    cfg = cfg or ModelConfig(in_channels=2, in_length=16, conv_channels=(4, 3))
    for seed in range(start_seed, start_seed + max_points):
        point_cfg = ModelConfig(**{**_config_dict(cfg), "seed": seed})
        params = init_params(point_cfg, np.float64)
        rng = substream(seed, "gradcheck-point")
        for name in PARAM_NAMES:
            if name.endswith(".b") or name.endswith("beta"):
                params[name] = rng.normal(0.0, 0.5, params[name].shape)
            elif name.endswith("gamma"):
                params[name] = rng.uniform(0.5, 1.5, params[name].shape)
        x = rng.standard_normal((batch_size, cfg.in_channels, cfg.in_length))
        y = np.arange(batch_size) % 2
        num, kinks = numerical_gradients(params, point_cfg, x, y, eps=eps, seed=seed,
                                         return_kinks=True)
        if kinks:
            continue
        ana = analytic_gradients(params, point_cfg, x, y, seed=seed)
        errs = {k: relative_error(ana[k], num[k]) for k in PARAM_NAMES}
        return {"max_rel_error": max(errs.values()), "per_param": errs, "seed": seed,
                "n_params": sum(params[k].size for k in PARAM_NAMES)}
    raise ModelError(f"no kink-free evaluation point in {max_points} seeds")
