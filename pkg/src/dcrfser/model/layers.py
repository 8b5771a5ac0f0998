"""Forward/backward pairs for the network layers.

Every ``*_forward`` returns its output plus a cache; the matching
``*_backward`` takes the upstream gradient and that cache. Gate order in
LSTM weight matrices is input, forget, cell, output.
"""
from __future__ import annotations

import numpy as np

from ..errors import DegenerateBatch, ShapeMismatch


def sigmoid(x):
    x = np.asarray(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# -- LSTM --------------------------------------------------------------------

def lstm_cell_forward(x, h_prev, c_prev, Wx, Wh, b):
    """One LSTM step.

    Parameters
    ----------
    x : (N, D) input at this step
    h_prev, c_prev : (N, H) previous hidden and cell state
    Wx : (D, 4H) input kernel
    Wh : (H, 4H) recurrent kernel
    b : (4H,) bias

    Returns
    -------
    h, c : (N, H)
    cache : tuple for :func:`lstm_cell_backward`
    """
    H = Wh.shape[0]
    if (Wx.shape[1] != 4 * H or Wh.shape[1] != 4 * H or b.shape != (4 * H,)
            or x.shape[-1] != Wx.shape[0] or h_prev.shape[-1] != H or c_prev.shape[-1] != H):
        raise ShapeMismatch(f"LSTM shapes disagree: x{x.shape} h{h_prev.shape} "
                            f"c{c_prev.shape} Wx{Wx.shape} Wh{Wh.shape} b{b.shape}")
    a = x @ Wx + h_prev @ Wh + b
    i = sigmoid(a[:, :H])
    f = sigmoid(a[:, H:2 * H])
    g = np.tanh(a[:, 2 * H:3 * H])
    o = sigmoid(a[:, 3 * H:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (x, h_prev, c_prev, Wx, Wh, i, f, g, o, tc)


def lstm_cell_backward(dh, dc, cache):
    x, h_prev, c_prev, Wx, Wh, i, f, g, o, tc = cache
    do = dh * tc
    dc = dc + dh * o * (1.0 - tc ** 2)
    di = dc * g
    df = dc * c_prev
    dg = dc * i
    dc_prev = dc * f
    da = np.concatenate([di * i * (1 - i), df * f * (1 - f), dg * (1 - g ** 2),
                         do * o * (1 - o)], axis=1)
    dx = da @ Wx.T
    dh_prev = da @ Wh.T
    dWx = x.T @ da
    dWh = h_prev.T @ da
    db = da.sum(axis=0)
    return dx, dh_prev, dc_prev, dWx, dWh, db


def lstm_forward(x, Wx, Wh, b, reverse=False):
    """Run an LSTM over ``x`` (N, T, D) from zero state; returns (N, T, H).

    With ``reverse`` the sequence is consumed from the last step to the first
    and outputs are stored at their original time index.
    """
    N, T, _ = x.shape
    H = Wh.shape[0]
    h = np.zeros((N, H), dtype=x.dtype)
    c = np.zeros((N, H), dtype=x.dtype)
    out = np.empty((N, T, H), dtype=x.dtype)
    steps = range(T - 1, -1, -1) if reverse else range(T)
    caches = []
    for t in steps:
        h, c, cache = lstm_cell_forward(x[:, t], h, c, Wx, Wh, b)
        out[:, t] = h
        caches.append((t, cache))
    return out, caches


def lstm_backward(dout, caches):
    N, T, H = dout.shape
    first = caches[0][1]
    Wx, Wh = first[3], first[4]
    dx = np.zeros((N, T, Wx.shape[0]), dtype=dout.dtype)
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(Wx.shape[1], dtype=dout.dtype)
    dh_next = np.zeros((N, H), dtype=dout.dtype)
    dc_next = np.zeros((N, H), dtype=dout.dtype)
    for t, cache in reversed(caches):
        dxt, dh_next, dc_next, dwx, dwh, dbt = lstm_cell_backward(
            dout[:, t] + dh_next, dc_next, cache)
        dx[:, t] = dxt
        dWx += dwx
        dWh += dwh
        db += dbt
    return dx, dWx, dWh, db


def bilstm_forward(x, fwd, bwd):
    """Bidirectional LSTM; ``fwd``/``bwd`` are (Wx, Wh, b) triples.

    Output is the forward states followed by the backward states, (N, T, 2H).
    """
    if x.ndim != 3 or x.shape[1] < 1:
        raise ShapeMismatch(f"expected (N, T>=1, D) input, got {x.shape}")
    hf, cf = lstm_forward(x, *fwd)
    hb, cb = lstm_forward(x, *bwd, reverse=True)
    return np.concatenate([hf, hb], axis=2), (cf, cb, hf.shape[2])


def bilstm_backward(dout, cache):
    cf, cb, H = cache
    dxf, *gf = lstm_backward(np.ascontiguousarray(dout[..., :H]), cf)
    dxb, *gb = lstm_backward(np.ascontiguousarray(dout[..., H:]), cb)
    return dxf + dxb, tuple(gf), tuple(gb)


# -- batch normalization -----------------------------------------------------

def batchnorm_forward(x, gamma, beta, running_mean, running_var, train,
                      momentum=0.99, eps=1e-3):
    """Batch normalization over rows of ``x`` (N, D).

    Training mode uses batch statistics and returns updated running
    statistics ``m <- momentum*m + (1-momentum)*batch``; inference mode uses
    the running statistics and returns them unchanged.
    """
    if train:
        if x.shape[0] < 2:
            raise DegenerateBatch("batch normalization needs >= 2 rows in training mode")
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        new_stats = (momentum * running_mean + (1 - momentum) * mu,
                     momentum * running_var + (1 - momentum) * var)
    else:
        mu, var = running_mean, running_var
        new_stats = (running_mean, running_var)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    return gamma * xhat + beta, (xhat, gamma, inv, train), new_stats


def batchnorm_backward(dout, cache):
    xhat, gamma, inv, train = cache
    dgamma = np.sum(dout * xhat, axis=0)
    dbeta = dout.sum(axis=0)
    dxhat = dout * gamma
    if not train:
        return dxhat * inv, dgamma, dbeta
    n = dout.shape[0]
    dx = inv / n * (n * dxhat - dxhat.sum(axis=0) - xhat * np.sum(dxhat * xhat, axis=0))
    return dx, dgamma, dbeta


# -- dropout, dense, activations ----------------------------------------------

def dropout_forward(x, rate, train, rng=None):
    """Inverted dropout; the returned mask already includes the 1/(1-rate) scale."""
    if not 0 <= rate < 1:
        raise ValueError("dropout rate must be in [0, 1)")
    if not train or rate == 0:
        return x, None
    keep = rng.random(x.shape) >= rate
    mask = keep.astype(x.dtype) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


def dense_forward(x, W, b):
    """Affine map on the last axis of ``x``."""
    if x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ShapeMismatch(f"dense shapes disagree: x{x.shape} W{W.shape} b{b.shape}")
    return x @ W + b, (x, W)


def dense_backward(dout, cache):
    x, W = cache
    x2 = x.reshape(-1, x.shape[-1])
    d2 = dout.reshape(-1, dout.shape[-1])
    return dout @ W.T, x2.T @ d2, d2.sum(axis=0)


def swish_forward(z):
    s = sigmoid(z)
    return z * s, (z, s)


def swish_backward(dout, cache):
    z, s = cache
    return dout * (s + z * s * (1 - s))


def leaky_relu_forward(z, slope=0.01):
    return np.where(z >= 0, z, slope * z), (z, slope)


def leaky_relu_backward(dout, cache):
    z, slope = cache
    return np.where(z >= 0, dout, slope * dout)


def softmax(z, axis=-1):
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood of integer ``labels`` under ``softmax(logits)``.

    ``logits`` is (..., K) and ``labels`` has the leading shape. Returns the
    loss, its gradient w.r.t. ``logits`` and the probabilities.
    """
    if logits.shape[:-1] != np.shape(labels):
        raise ShapeMismatch(f"logits {logits.shape} vs labels {np.shape(labels)}")
    K = logits.shape[-1]
    z = logits.reshape(-1, K)
    y = np.asarray(labels).reshape(-1)
    shifted = z - z.max(axis=1, keepdims=True)
    log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    n = y.size
    loss = -log_p[np.arange(n), y].mean()
    p = np.exp(log_p)
    d = p.copy()
    d[np.arange(n), y] -= 1.0
    return loss, (d / n).reshape(logits.shape), p.reshape(logits.shape)
