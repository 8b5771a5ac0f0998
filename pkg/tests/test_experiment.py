import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dcrfser.errors import DataError, ShapeMismatch
from dcrfser.features import FeatureTable
from dcrfser.harness.experiment import (PCAConfig, SplitConfig, apply_input_transform,
                                        evaluate_checkpoint, fit_input_transform, is_original,
                                        origins, run_crossval, run_holdout)
from dcrfser.harness.metrics import evaluate_predictions
from dcrfser.harness.report import write_report
from dcrfser.harness.training import HISTORY_COLUMNS, TrainConfig
from dcrfser.model import ModelConfig

MODEL = ModelConfig(lstm_units=8, lstm_layers=1, dense_units=16, dropout=0.1)
TRAIN = TrainConfig(epochs=12, batch_size=32, lr=5e-3)
VARIANTS = 4


def feature_table(classes=(0, 1, 2), per_class=12, d=20, seed=0):
    """Gaussian clusters, each original followed by jittered '~' variants."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(0, 3, (7, d))
    ids, labels, rows = [], [], []
    for c in classes:
        for i in range(per_class):
            base = centers[c] + rng.normal(0, 0.5, d)
            ids.append(f"T/c{c}_{i}")
            labels.append(c)
            rows.append(base)
            for v in range(VARIANTS - 1):
                ids.append(f"T/c{c}_{i}~noise{v}@0.01")
                labels.append(c)
                rows.append(base + rng.normal(0, 0.05, d))
    return FeatureTable(ids, labels, np.array(rows))


def test_id_helpers():
    ids = ["a/b", "a/b~pitch0@0.7", "c"]
    assert origins(ids).tolist() == ["a/b", "a/b", "c"]
    assert is_original(ids).tolist() == [True, False, True]


def test_input_transform_shapes():
    t = feature_table()
    std, pca = fit_input_transform(t.X, PCAConfig(variance_threshold=0.9))
    Z = apply_input_transform(t.X, std, pca)
    assert Z.shape == (len(t), 1, pca.k)
    std, none = fit_input_transform(t.X, PCAConfig(enabled=False))
    assert none is None and apply_input_transform(t.X, std, None).shape == (len(t), 1, 20)
    with pytest.raises(ShapeMismatch):
        apply_input_transform(t.X[:, :5], std, None)


def test_grouped_holdout_keeps_clips_together():
    t = feature_table()
    res = run_holdout(t, MODEL, TRAIN, PCAConfig(n_components=6), SplitConfig())
    meta = res.checkpoint.meta
    assert all("~" not in i for i in res.test_ids)
    # every training group arrives whole, so the row count is a multiple of the variant count
    assert meta["n_train"] % VARIANTS == 0
    assert meta["mode"] == "grouped" and res.checkpoint.config.input_dim == 6
    assert res.checkpoint.config.n_classes == 7 and meta["classes"][0] == "neutral"
    assert len(res.history) == TRAIN.epochs
    assert res.metrics.accuracy >= 0.8


def test_replication_mode_splits_rows_independently():
    t = feature_table()
    res = run_holdout(t, MODEL, TrainConfig(epochs=2, batch_size=32, lr=5e-3),
                      PCAConfig(n_components=6),
                      SplitConfig(validation_fraction=0.0, replication=True))
    meta = res.checkpoint.meta
    assert meta["mode"] == "replication"
    assert meta["n_train"] + meta["n_test"] == len(t)
    assert any("~" in i for i in res.test_ids)


def test_restricted_classes_and_checkpoint_evaluation():
    t = feature_table(classes=(1, 4, 5))
    res = run_holdout(t, MODEL, TRAIN, PCAConfig(n_components=5),
                      SplitConfig(restrict_classes=True))
    ck = res.checkpoint
    assert ck.config.n_classes == 3
    assert ck.meta["classes"] == ["happy", "fear", "disgust"]
    again = evaluate_checkpoint(ck, t, res.test_ids)
    assert again.accuracy == res.metrics.accuracy
    np.testing.assert_array_equal(again.confusion, res.metrics.confusion)
    with pytest.raises(DataError):
        evaluate_checkpoint(ck, t, ["T/unknown"])
    foreign = feature_table(classes=(0,), per_class=2)
    with pytest.raises(DataError):
        evaluate_checkpoint(ck, foreign)


def test_same_seed_same_metrics():
    t = feature_table()
    tc = TrainConfig(epochs=3, batch_size=32, lr=5e-3)
    a = run_holdout(t, MODEL, tc, PCAConfig(n_components=4))
    b = run_holdout(t, MODEL, tc, PCAConfig(n_components=4))
    assert a.metrics.to_dict() == b.metrics.to_dict()


def test_crossval_covers_every_original_once():
    t = feature_table(per_class=6)
    runs = run_crossval(t, MODEL, TrainConfig(epochs=2, batch_size=32, lr=5e-3),
                        PCAConfig(n_components=4), k=3)
    assert len(runs) == 3
    held = sorted(i for r in runs for i in r.test_ids)
    assert held == sorted(i for i in t.ids if "~" not in i)
    assert [r.checkpoint.meta["fold"] for r in runs] == [0, 1, 2]


def test_too_small_table():
    with pytest.raises(DataError):
        run_holdout(feature_table(per_class=1).subset([0, 1, 2]), MODEL, TRAIN)


# -- report ------------------------------------------------------------------

def test_report_files(tmp_path):
    history = [{"epoch": e, "train_loss": 1.0 / e, "train_accuracy": 0.5, "val_loss": 1.0,
                "val_accuracy": 0.4} for e in (1, 2, 3)]
    m = evaluate_predictions([0, 1, 2, 2], [0, 1, 1, 2], 3, ["a<b", "b", "c"])
    paths = write_report(history, m, tmp_path / "out")
    assert set(paths) == {"history", "metrics", "confusion_csv", "confusion_svg"}
    assert all(p.exists() for p in paths.values())
    with open(tmp_path / "out/history.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == HISTORY_COLUMNS and len(rows) == 4
    doc = json.loads((tmp_path / "out/metrics.json").read_text())
    assert doc["accuracy"] == m.accuracy
    with open(tmp_path / "out/confusion_matrix.csv", newline="") as fh:
        cm = list(csv.reader(fh))
    assert [list(map(int, r[1:])) for r in cm[1:]] == m.confusion.tolist()
    svg = ET.parse(tmp_path / "out/confusion_matrix.svg").getroot()
    assert svg.tag.endswith("svg")
    texts = [e.text for e in svg.iter() if e.tag.endswith("text")]
    assert "a<b" in texts
