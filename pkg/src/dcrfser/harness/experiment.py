"""Holdout and cross-validation runs over a feature table.

Rows whose id contains ``~`` are augmented variants of the row named by
the part before it. By default a clip and all of its variants stay on the
same side of every split, input transforms are fitted on training rows
only, and validation/test scores use unaugmented rows only. Setting
``replication`` splits rows independently and fits the transforms on
every row instead.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import DataError, ShapeMismatch
from ..features import (FeatureTable, PCAModel, Standardizer, fit_standardizer, pca_fit)
from ..model.checkpoint import Checkpoint
from ..model.network import ModelConfig, predict
from .manifest import EMOTIONS
from .metrics import Metrics, evaluate_predictions
from .splits import stratified_kfold, stratified_split
from .training import TrainConfig, fit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PCAConfig:
    enabled: bool = True
    variance_threshold: float = 0.99
    n_components: int = 0  # 0 selects by variance_threshold


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8
    # share of the training part held out for checkpoint selection; 0 selects on the test split
    validation_fraction: float = 0.1
    seed: int = 0
    restrict_classes: bool = False
    replication: bool = False


@dataclass
class RunResult:
    checkpoint: Checkpoint
    history: list
    metrics: Metrics
    test_ids: list = field(default_factory=list)


def origins(ids) -> np.ndarray:
    return np.array([i.split("~", 1)[0] for i in ids])


def is_original(ids) -> np.ndarray:
    return np.array(["~" not in i for i in ids], dtype=bool)


def class_list(labels, restrict: bool) -> list[int]:
    return sorted(int(c) for c in np.unique(labels)) if restrict else list(range(len(EMOTIONS)))


def fit_input_transform(X, pca_cfg: PCAConfig):
    std = fit_standardizer(X)
    if not pca_cfg.enabled:
        return std, None
    Z = std.transform(X)
    return std, pca_fit(Z, pca_cfg.variance_threshold, pca_cfg.n_components or None)


def apply_input_transform(X, std: Standardizer, pca: PCAModel | None) -> np.ndarray:
    """Standardize, project and add the unit time axis: (n, d) -> (n, 1, k)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != std.means.size:
        raise ShapeMismatch(f"features of width {X.shape[-1]} vs transform width "
                            f"{std.means.size}")
    Z = std.transform(X)
    if pca is not None:
        Z = pca.transform(Z)
    return Z[:, None, :]


def _targets(labels, classes):
    lookup = {c: i for i, c in enumerate(classes)}
    try:
        return np.array([lookup[int(v)] for v in labels], dtype=np.int64)[:, None]
    except KeyError as exc:
        raise DataError(f"label index {exc.args[0]} is outside the model's classes") from None


def _train_and_score(table, tr, va, te, classes, model_cfg, train_cfg, pca_cfg, seed,
                     replication, meta):
    fit_rows = np.arange(len(table)) if replication else tr
    std, pca = fit_input_transform(table.X[fit_rows], pca_cfg)
    k = pca.k if pca is not None else table.X.shape[1]
    cfg = replace(model_cfg, input_dim=k, n_classes=len(classes), seq_len=1)

    def X(idx):
        return apply_input_transform(table.X[idx], std, pca)

    def y(idx):
        return _targets(table.labels[idx], classes)

    result = fit(cfg, train_cfg, X(tr), y(tr), X(va), y(va), seed=seed)
    names = [EMOTIONS[c] for c in classes]
    pred = predict(result.params, X(te), cfg)
    metrics = evaluate_predictions(y(te).ravel(), pred.ravel(), len(classes), names)
    meta = dict(meta, classes=names, class_indices=list(classes), seed=seed,
                best_epoch=result.best_epoch, history=result.history,
                test_ids=[table.ids[i] for i in te], n_train=int(len(tr)),
                n_validation=int(len(va)), n_test=int(len(te)))
    ckpt = Checkpoint(cfg, result.params, meta, std, pca)
    return RunResult(ckpt, result.history, metrics, meta["test_ids"])


def run_holdout(table: FeatureTable, model_cfg: ModelConfig, train_cfg: TrainConfig,
                pca_cfg: PCAConfig = PCAConfig(), split: SplitConfig = SplitConfig()) -> RunResult:
    """Split, fit input transforms, train and score on the test part."""
    if len(table) < 4:
        raise DataError(f"{len(table)} rows are too few to train and test")
    groups = None if split.replication else origins(table.ids)
    classes = class_list(table.labels, split.restrict_classes)
    tr, te = stratified_split(table.labels, split.train_fraction, split.seed, groups)
    if split.validation_fraction > 0:
        a, b = stratified_split(table.labels[tr], 1.0 - split.validation_fraction,
                                split.seed + 1, None if groups is None else groups[tr])
        tr, va = tr[a], tr[b]
    else:
        va = te
    if not split.replication:
        keep = is_original(table.ids)
        va, te = va[keep[va]], te[keep[te]]
    meta = {"mode": "replication" if split.replication else "grouped"}
    return _train_and_score(table, tr, va, te, classes, model_cfg, train_cfg, pca_cfg,
                            split.seed, split.replication, meta)


def run_crossval(table: FeatureTable, model_cfg: ModelConfig, train_cfg: TrainConfig,
                 pca_cfg: PCAConfig = PCAConfig(), split: SplitConfig = SplitConfig(),
                 k: int = 5) -> list[RunResult]:
    """One run per stratified fold; each fold's held-out part is both the
    selection and the scoring set."""
    groups = None if split.replication else origins(table.ids)
    classes = class_list(table.labels, split.restrict_classes)
    keep = is_original(table.ids)
    results = []
    for f, (tr, va) in enumerate(stratified_kfold(table.labels, k, split.seed, groups)):
        if not split.replication:
            va = va[keep[va]]
        log.info("fold %d/%d: %d train rows, %d held out", f + 1, k, tr.size, va.size)
        results.append(_train_and_score(table, tr, va, va, classes, model_cfg, train_cfg,
                                        pca_cfg, split.seed + f, split.replication,
                                        {"fold": f, "k": k}))
    return results


def evaluate_checkpoint(ckpt: Checkpoint, table: FeatureTable, ids=None) -> Metrics:
    """Score a checkpoint on the rows of ``table`` named by ``ids`` (all rows when None)."""
    if ids is not None:
        pos = {sid: i for i, sid in enumerate(table.ids)}
        missing = [i for i in ids if i not in pos]
        if missing:
            raise DataError(f"{len(missing)} evaluation ids absent from the feature store, "
                            f"e.g. {missing[0]!r}")
        table = table.subset([pos[i] for i in ids])
    if ckpt.standardizer is None:
        raise DataError("checkpoint carries no input transform")
    classes = ckpt.meta.get("class_indices", list(range(ckpt.config.n_classes)))
    X = apply_input_transform(table.X, ckpt.standardizer, ckpt.pca)
    if X.shape[2] != ckpt.config.input_dim:
        raise ShapeMismatch(f"transformed width {X.shape[2]} vs model input "
                            f"{ckpt.config.input_dim}")
    y = _targets(table.labels, classes)
    pred = predict(ckpt.params, X, ckpt.config)
    names = ckpt.meta.get("classes", [EMOTIONS[c] for c in classes])
    return evaluate_predictions(y.ravel(), pred.ravel(), len(classes), names)
