"""Stacked BiLSTM classifier with a CRF head.

Layer order: ``lstm_layers`` x [BiLSTM, batch norm, dropout], dense with
swish, dropout, linear dense, dropout, leaky ReLU, CRF (features pass
through, the transition matrix scores the label potentials), then a
per-step dense layer producing ``n_classes`` potentials.

Parameters live in a flat ``dict`` keyed by names such as
``"bilstm0/fwd/kernel"`` or ``"bn2/moving_mean"``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ShapeMismatch
from . import layers as L
from .crf import crf_decode_batch, crf_marginals_batch, crf_nll_batch

LOSS_MODES = ("softmax_ce", "crf_nll")
NON_TRAINABLE = ("moving_mean", "moving_variance")


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 190
    seq_len: int = 1
    lstm_units: int = 512
    lstm_layers: int = 3
    dense_units: int = 512
    dropout: float = 0.3
    l2_coeff: float = 1e-4
    n_classes: int = 7
    leaky_slope: float = 0.01
    loss_mode: str = "softmax_ce"
    bn_momentum: float = 0.99
    bn_eps: float = 1e-3

    def __post_init__(self):
        for name in ("input_dim", "seq_len", "lstm_units", "lstm_layers", "dense_units"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.l2_coeff < 0:
            raise ValueError("l2_coeff must be >= 0")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")

    def to_dict(self) -> dict:
        return asdict(self)


def is_trainable(name: str) -> bool:
    return not name.endswith(NON_TRAINABLE)


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    U, D = config.lstm_units, config.dense_units
    shapes = {}
    width = config.input_dim
    for l in range(config.lstm_layers):
        for d in ("fwd", "bwd"):
            shapes[f"bilstm{l}/{d}/kernel"] = (width, 4 * U)
            shapes[f"bilstm{l}/{d}/recurrent_kernel"] = (U, 4 * U)
            shapes[f"bilstm{l}/{d}/bias"] = (4 * U,)
        for p in ("gamma", "beta", "moving_mean", "moving_variance"):
            shapes[f"bn{l}/{p}"] = (2 * U,)
        width = 2 * U
    shapes["dense/kernel"] = (width, D)
    shapes["dense/bias"] = (D,)
    shapes["dense_1/kernel"] = (D, D)
    shapes["dense_1/bias"] = (D,)
    shapes["crf/transitions"] = (config.n_classes, config.n_classes)
    shapes["output/kernel"] = (D, config.n_classes)
    shapes["output/bias"] = (config.n_classes,)
    return shapes


def param_count(config: ModelConfig) -> tuple[int, int, int]:
    """(total, trainable, non_trainable) scalar parameter counts."""
    total = trainable = 0
    for name, shape in param_shapes(config).items():
        n = int(np.prod(shape))
        total += n
        if is_trainable(name):
            trainable += n
    return total, trainable, total - trainable


def layer_summary(config: ModelConfig) -> list[tuple[str, tuple, int]]:
    """Rows of (layer name, per-sample output shape, parameter count)."""
    shapes = param_shapes(config)

    def count(prefix):
        return sum(int(np.prod(s)) for n, s in shapes.items() if n.startswith(prefix + "/"))

    def suffix(i):
        return "" if i == 0 else f"_{i}"

    T, U, D, K = config.seq_len, config.lstm_units, config.dense_units, config.n_classes
    rows, drop = [], 0
    for l in range(config.lstm_layers):
        rows.append((f"bidirectional{suffix(l)}", (T, 2 * U), count(f"bilstm{l}")))
        rows.append((f"batch_normalization{suffix(l)}", (T, 2 * U), count(f"bn{l}")))
        rows.append((f"dropout{suffix(drop)}", (T, 2 * U), 0))
        drop += 1
    rows.append(("dense", (T, D), count("dense")))
    rows.append((f"dropout{suffix(drop)}", (T, D), 0))
    rows.append(("dense_1", (T, D), count("dense_1")))
    rows.append((f"dropout{suffix(drop + 1)}", (T, D), 0))
    rows.append(("leaky_re_lu", (T, D), 0))
    rows.append(("crf_layer", (T, D), count("crf")))
    rows.append(("time_distributed", (T, K), count("output")))
    return rows


def _glorot(rng, shape, dtype):
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, shape).astype(dtype)


def _orthogonal(rng, shape, dtype):
    rows, cols = shape
    a = rng.normal(size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return q.astype(dtype)


def init_params(config: ModelConfig, seed: int = 0, dtype=np.float32) -> dict[str, np.ndarray]:
    """Glorot-uniform kernels, orthogonal recurrent kernels, zero biases with
    forget-gate bias 1, identity batch norm and zero CRF transitions."""
    rng = np.random.default_rng(seed)
    U = config.lstm_units
    params = {}
    for name, shape in param_shapes(config).items():
        leaf = name.rsplit("/", 1)[1]
        if leaf == "recurrent_kernel":
            params[name] = _orthogonal(rng, shape, dtype)
        elif leaf == "kernel":
            params[name] = _glorot(rng, shape, dtype)
        elif leaf == "bias" and name.startswith("bilstm"):
            b = np.zeros(shape, dtype=dtype)
            b[U:2 * U] = 1.0
            params[name] = b
        elif leaf in ("gamma", "moving_variance"):
            params[name] = np.ones(shape, dtype=dtype)
        else:
            params[name] = np.zeros(shape, dtype=dtype)
    return params


def _lstm_weights(params, l, d):
    p = f"bilstm{l}/{d}/"
    return params[p + "kernel"], params[p + "recurrent_kernel"], params[p + "bias"]


def forward(params, x, config: ModelConfig, train: bool = False, rng=None):
    """Label potentials (B, T, n_classes) for a batch ``x`` of shape (B, T, input_dim).

    Returns ``(logits, cache, bn_stats)``; ``bn_stats`` maps running-stat
    parameter names to their updated values (unchanged in inference mode).
    """
    dtype = params["dense/kernel"].dtype
    x = np.asarray(x, dtype=dtype)
    if x.ndim != 3 or x.shape[1:] != (config.seq_len, config.input_dim):
        raise ShapeMismatch(f"expected (B, {config.seq_len}, {config.input_dim}) input, "
                            f"got {x.shape}")
    if train and config.dropout > 0 and rng is None:
        raise ValueError("training mode with dropout needs an rng")
    B, T, _ = x.shape
    caches = []
    bn_stats = {}
    h = x
    for l in range(config.lstm_layers):
        h, c_lstm = L.bilstm_forward(h, _lstm_weights(params, l, "fwd"),
                                     _lstm_weights(params, l, "bwd"))
        width = h.shape[2]
        p = f"bn{l}/"
        flat, c_bn, (mm, mv) = L.batchnorm_forward(
            h.reshape(B * T, width), params[p + "gamma"], params[p + "beta"],
            params[p + "moving_mean"], params[p + "moving_variance"], train,
            config.bn_momentum, config.bn_eps)
        bn_stats[p + "moving_mean"] = mm.astype(dtype)
        bn_stats[p + "moving_variance"] = mv.astype(dtype)
        h, m = L.dropout_forward(flat.reshape(B, T, width), config.dropout, train, rng)
        caches.append((c_lstm, c_bn, m))
    z, c_d0 = L.dense_forward(h, params["dense/kernel"], params["dense/bias"])
    h, c_sw = L.swish_forward(z)
    h, m0 = L.dropout_forward(h, config.dropout, train, rng)
    h, c_d1 = L.dense_forward(h, params["dense_1/kernel"], params["dense_1/bias"])
    h, m1 = L.dropout_forward(h, config.dropout, train, rng)
    h, c_lr = L.leaky_relu_forward(h, config.leaky_slope)
    logits, c_out = L.dense_forward(h, params["output/kernel"], params["output/bias"])
    head = (c_d0, c_sw, m0, c_d1, m1, c_lr, c_out)
    return logits, (caches, head, B, T), bn_stats


def backward(dlogits, cache, config: ModelConfig) -> dict[str, np.ndarray]:
    """Gradients of all trainable parameters except the CRF transitions."""
    caches, (c_d0, c_sw, m0, c_d1, m1, c_lr, c_out), B, T = cache
    g = {}
    dh, g["output/kernel"], g["output/bias"] = L.dense_backward(dlogits, c_out)
    dh = L.leaky_relu_backward(dh, c_lr)
    dh = L.dropout_backward(dh, m1)
    dh, g["dense_1/kernel"], g["dense_1/bias"] = L.dense_backward(dh, c_d1)
    dh = L.dropout_backward(dh, m0)
    dh = L.swish_backward(dh, c_sw)
    dh, g["dense/kernel"], g["dense/bias"] = L.dense_backward(dh, c_d0)
    for l in range(config.lstm_layers - 1, -1, -1):
        c_lstm, c_bn, m = caches[l]
        dh = L.dropout_backward(dh, m)
        width = dh.shape[2]
        dflat, g[f"bn{l}/gamma"], g[f"bn{l}/beta"] = L.batchnorm_backward(
            dh.reshape(B * T, width), c_bn)
        dh, gf, gb = L.bilstm_backward(dflat.reshape(B, T, width), c_lstm)
        for d, grads in (("fwd", gf), ("bwd", gb)):
            for leaf, val in zip(("kernel", "recurrent_kernel", "bias"), grads):
                g[f"bilstm{l}/{d}/{leaf}"] = val
    return g


def l2_penalty(params, config: ModelConfig) -> float:
    """``l2_coeff`` times the squared norm of the LSTM input kernels."""
    if config.l2_coeff == 0:
        return 0.0
    total = 0.0
    for l in range(config.lstm_layers):
        for d in ("fwd", "bwd"):
            w = params[f"bilstm{l}/{d}/kernel"]
            total += float(np.sum(w.astype(np.float64) ** 2))
    return config.l2_coeff * total


def data_loss(logits, labels, transitions, config: ModelConfig):
    """Loss without regularization and its gradients w.r.t. logits and transitions."""
    if config.loss_mode == "crf_nll":
        return crf_nll_batch(logits, transitions, labels)
    loss, dlogits, _ = L.softmax_cross_entropy(logits, labels)
    return loss, dlogits, np.zeros_like(transitions)


def loss_and_grads(params, x, labels, config: ModelConfig, train: bool = True, rng=None):
    """Total loss (data term plus L2) and gradients of every trainable parameter.

    Returns ``(loss, grads, bn_stats)``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    logits, cache, bn_stats = forward(params, x, config, train, rng)
    if labels.shape != logits.shape[:2]:
        raise ShapeMismatch(f"labels {labels.shape} vs batch {logits.shape[:2]}")
    if labels.size and (labels.min() < 0 or labels.max() >= config.n_classes):
        raise ValueError("label index outside [0, n_classes)")
    trans = params["crf/transitions"]
    loss, dlogits, dtrans = data_loss(logits, labels, trans, config)
    dtype = logits.dtype
    grads = backward(dlogits.astype(dtype), cache, config)
    grads["crf/transitions"] = np.asarray(dtrans, dtype=dtype)
    if config.l2_coeff:
        for l in range(config.lstm_layers):
            for d in ("fwd", "bwd"):
                name = f"bilstm{l}/{d}/kernel"
                grads[name] = grads[name] + (2.0 * config.l2_coeff) * params[name]
    return float(loss) + l2_penalty(params, config), grads, bn_stats


def predict_proba(params, x, config: ModelConfig) -> np.ndarray:
    """Per-step class probabilities (B, T, n_classes) in inference mode.

    Softmax over the potentials in ``softmax_ce`` mode; CRF posterior
    marginals in ``crf_nll`` mode.
    """
    logits, _, _ = forward(params, x, config, train=False)
    if config.loss_mode == "crf_nll":
        return crf_marginals_batch(logits, params["crf/transitions"])
    return L.softmax(logits.astype(np.float64))


def predict(params, x, config: ModelConfig) -> np.ndarray:
    """Predicted label indices (B, T); Viterbi decoding in ``crf_nll`` mode."""
    logits, _, _ = forward(params, x, config, train=False)
    return decode(logits, params["crf/transitions"], config)


def decode(logits, transitions, config: ModelConfig) -> np.ndarray:
    if config.loss_mode == "crf_nll":
        return crf_decode_batch(logits, transitions)
    return np.argmax(logits, axis=-1)
