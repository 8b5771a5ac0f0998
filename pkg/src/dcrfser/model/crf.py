"""Linear-chain CRF over per-step label potentials.

``transitions[i, j]`` scores moving from label ``i`` at step ``t-1`` to
label ``j`` at step ``t``. Single-sequence functions take ``unaries`` of
shape (T, K); the ``*_batch`` variants take (B, T, K).
"""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from ..errors import ShapeMismatch


def _check(unaries, transitions):
    u = np.asarray(unaries, dtype=np.float64)
    A = np.asarray(transitions, dtype=np.float64)
    if u.ndim < 2 or u.shape[-2] < 1 or u.shape[-1] < 2:
        raise ShapeMismatch(f"unaries must be (..., T>=1, K>=2), got {u.shape}")
    if A.shape != (u.shape[-1], u.shape[-1]):
        raise ShapeMismatch(f"transitions {A.shape} do not match K={u.shape[-1]}")
    return u, A


def crf_score(unaries, transitions, labels) -> float:
    u, A = _check(unaries, transitions)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (u.shape[0],):
        raise ShapeMismatch(f"labels {y.shape} vs T={u.shape[0]}")
    return float(u[np.arange(y.size), y].sum() + A[y[:-1], y[1:]].sum())


def _forward(u, A):
    """Log forward messages, shape (B, T, K)."""
    B, T, K = u.shape
    alpha = np.empty_like(u)
    alpha[:, 0] = u[:, 0]
    for t in range(1, T):
        alpha[:, t] = logsumexp(alpha[:, t - 1, :, None] + A[None], axis=1) + u[:, t]
    return alpha


def _backward(u, A):
    B, T, K = u.shape
    beta = np.zeros_like(u)
    for t in range(T - 2, -1, -1):
        beta[:, t] = logsumexp(A[None] + (u[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
    return beta


def crf_log_partition(unaries, transitions) -> float:
    """log of the summed exp-score over all ``K**T`` label sequences."""
    u, A = _check(unaries, transitions)
    alpha = _forward(u[None], A)
    return float(logsumexp(alpha[0, -1]))


def crf_nll(unaries, transitions, labels) -> float:
    return crf_log_partition(unaries, transitions) - crf_score(unaries, transitions, labels)


def crf_viterbi(unaries, transitions) -> np.ndarray:
    """Highest-scoring label sequence; ties go to the lowest label index."""
    u, A = _check(unaries, transitions)
    T, K = u.shape
    delta = u[0].copy()
    back = np.zeros((T, K), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, None] + A  # prev x cur
        back[t] = np.argmax(cand, axis=0)  # argmax returns the first maximum
        delta = cand[back[t], np.arange(K)] + u[t]
    path = np.empty(T, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def crf_marginals(unaries, transitions) -> np.ndarray:
    """Per-step label posteriors, shape (T, K)."""
    u, A = _check(unaries, transitions)
    return _unary_marginals(u[None], A)[0]


def _unary_marginals(u, A):
    alpha = _forward(u, A)
    beta = _backward(u, A)
    log_z = logsumexp(alpha[:, -1], axis=1)
    return np.exp(alpha + beta - log_z[:, None, None])


def crf_nll_batch(unaries, transitions, labels):
    """Mean NLL over a batch with gradients.

    Returns ``(loss, d_unaries, d_transitions)`` where the gradients are of
    the mean over the ``B`` sequences.
    """
    u, A = _check(unaries, transitions)
    y = np.asarray(labels, dtype=np.int64)
    if u.ndim != 3 or y.shape != u.shape[:2]:
        raise ShapeMismatch(f"labels {y.shape} vs unaries {u.shape}")
    B, T, K = u.shape
    alpha = _forward(u, A)
    beta = _backward(u, A)
    log_z = logsumexp(alpha[:, -1], axis=1)
    bi = np.arange(B)[:, None]
    score = u[bi, np.arange(T)[None], y].sum(axis=1)
    if T > 1:
        score = score + A[y[:, :-1], y[:, 1:]].sum(axis=1)
    loss = float(np.mean(log_z - score))

    d_u = np.exp(alpha + beta - log_z[:, None, None])
    np.add.at(d_u, (bi, np.arange(T)[None], y), -1.0)
    d_A = np.zeros_like(A)
    if T > 1:
        pair = (alpha[:, :-1, :, None] + A[None, None]
                + (u[:, 1:] + beta[:, 1:])[:, :, None, :] - log_z[:, None, None, None])
        d_A = np.exp(pair).sum(axis=(0, 1))
        np.add.at(d_A, (y[:, :-1], y[:, 1:]), -1.0)
    return loss, d_u / B, d_A / B


def crf_marginals_batch(unaries, transitions) -> np.ndarray:
    u, A = _check(unaries, transitions)
    return _unary_marginals(u, A)


def crf_decode_batch(unaries, transitions) -> np.ndarray:
    u, _ = _check(unaries, transitions)
    return np.stack([crf_viterbi(seq, transitions) for seq in u])
