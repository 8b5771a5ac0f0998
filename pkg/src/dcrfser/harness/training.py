"""Mini-batch training with Adam and best-validation selection."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteLoss
from ..model.network import (ModelConfig, data_loss, decode, forward, init_params,
                             is_trainable, l2_penalty, loss_and_grads)
from ..model.optim import AdamState, adam_step

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 256
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 0  # 0 disables early stopping
    dtype: str = "float32"
    eval_batch: int = 2048

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 2:
            raise ValueError("epochs must be >= 0 and batch_size >= 2")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")


@dataclass
class FitResult:
    params: dict
    history: list  # dicts keyed by HISTORY_COLUMNS
    best_epoch: int  # 0 when no epoch ran


def batch_slices(n: int, batch_size: int):
    """Contiguous batch boundaries; a trailing batch of one row is merged into
    the previous batch so batch normalization always sees two rows."""
    bounds = list(range(0, n, batch_size)) + [n]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] == 1:
        del bounds[-2]
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def evaluate_loss_accuracy(params, X, y, config: ModelConfig, eval_batch: int = 2048):
    """Inference-mode mean loss (data term plus L2) and per-step accuracy."""
    losses, correct, count = 0.0, 0, 0
    for s in batch_slices(X.shape[0], eval_batch):
        logits, _, _ = forward(params, X[s], config, train=False)
        loss, _, _ = data_loss(logits, y[s], params["crf/transitions"], config)
        n = X[s].shape[0]
        losses += loss * n
        pred = decode(logits, params["crf/transitions"], config)
        correct += int(np.sum(pred == y[s]))
        count += y[s].size
    return float(losses / X.shape[0] + l2_penalty(params, config)), correct / count


def fit(config: ModelConfig, train_cfg: TrainConfig, X, y, X_val=None, y_val=None,
        seed: int = 0, params=None) -> FitResult:
    """Train on ``X`` (n, T, d) with integer targets ``y`` (n, T).

    Each epoch shuffles the rows, steps Adam once per batch and then scores
    the train and validation sets in inference mode. The returned parameters
    are those of the epoch with the highest validation accuracy (training
    accuracy when no validation set is given); ties keep the earlier epoch.

    Raises
    ------
    NonFiniteLoss
        A batch loss became NaN or infinite.
    """
    dtype = np.dtype(train_cfg.dtype)
    rng = np.random.default_rng(seed)
    if params is None:
        params = init_params(config, seed, dtype)
    X = np.asarray(X, dtype=dtype)
    y = np.asarray(y, dtype=np.int64)
    has_val = X_val is not None and len(X_val) > 0
    if has_val:
        X_val = np.asarray(X_val, dtype=dtype)
        y_val = np.asarray(y_val, dtype=np.int64)
    state = AdamState(train_cfg.lr, train_cfg.beta1, train_cfg.beta2, train_cfg.eps)
    best = {k: v.copy() for k, v in params.items()}
    best_score, best_epoch, stale = -1.0, 0, 0
    history = []
    for epoch in range(1, train_cfg.epochs + 1):
        order = rng.permutation(X.shape[0])
        total = 0.0
        for b, s in enumerate(batch_slices(X.shape[0], train_cfg.batch_size)):
            idx = order[s]
            loss, grads, bn_stats = loss_and_grads(params, X[idx], y[idx], config,
                                                   train=True, rng=rng)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss {loss} at epoch {epoch}, batch {b} "
                                    f"(lr {train_cfg.lr}, batch size {idx.size})")
            adam_step(state, params, {k: g for k, g in grads.items() if is_trainable(k)})
            params.update(bn_stats)
            total += float(loss) * idx.size
        _, train_acc = evaluate_loss_accuracy(params, X, y, config, train_cfg.eval_batch)
        row = {"epoch": epoch, "train_loss": total / X.shape[0], "train_accuracy": train_acc,
               "val_loss": float("nan"), "val_accuracy": float("nan")}
        if has_val:
            row["val_loss"], row["val_accuracy"] = evaluate_loss_accuracy(
                params, X_val, y_val, config, train_cfg.eval_batch)
        history.append(row)
        score = row["val_accuracy"] if has_val else train_acc
        if score > best_score:
            best_score, best_epoch, stale = score, epoch, 0
            best = {k: v.copy() for k, v in params.items()}
        else:
            stale += 1
        log.info("epoch %d loss %.4f acc %.4f val_acc %.4f", epoch, row["train_loss"],
                 train_acc, row["val_accuracy"])
        if train_cfg.patience and stale >= train_cfg.patience:
            break
    return FitResult(best, history, best_epoch)
