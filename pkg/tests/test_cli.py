import json

import numpy as np
import pytest

from dcrfser.cli import main
from dcrfser.config import ConfigError, ExperimentConfig, from_dict, load_config
from dcrfser.features import FeatureTable, load_features, save_features
from dcrfser.harness.manifest import DatasetManifest, Emotion, parse_ravdess
from dcrfser.harness.synthetic import generate_corpus, ravdess_name
from dcrfser.model import load_checkpoint

from test_manifest import build_fourteen

TINY = """
[model]
lstm_units = 8
lstm_layers = 1
dense_units = 16
dropout = 0.1

[train]
epochs = 3
batch_size = 16
lr = 0.005

[pca]
n_components = 6

[split]
validation_fraction = 0.0
"""


# -- config ------------------------------------------------------------------

def test_shipped_default_config_equals_code_defaults(pytestconfig):
    root = pytestconfig.rootpath
    assert load_config(root / "configs/default.toml") == ExperimentConfig()
    synthetic = load_config(root / "configs/synthetic.toml")
    assert synthetic.model.lstm_units == 32 and synthetic.train.epochs == 50


def test_config_rejects_unknown_and_invalid_values(tmp_path):
    with pytest.raises(ConfigError):
        from_dict({"modle": {}})
    with pytest.raises(ConfigError):
        from_dict({"model": {"units": 3}})
    with pytest.raises(ConfigError):
        from_dict({"model": {"dropout": 1.5}})
    (tmp_path / "bad.toml").write_text("[model\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.toml")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")
    assert from_dict({"augment": {"pitch_steps": [1, 2]}}).augment.pitch_steps == (1.0, 2.0)


# -- synthetic corpus --------------------------------------------------------

def test_synthetic_names_parse_to_their_class(tmp_path):
    for emotion in Emotion:
        for i in (0, 7, 34):
            _, name = ravdess_name(emotion, i)
            assert parse_ravdess(name[:-4]) == emotion.label
    paths = generate_corpus(tmp_path, clips_per_class=2, seed=1)
    assert len(paths) == 14 and len({p.name for p in paths}) == 14
    with pytest.raises(ValueError):
        generate_corpus(tmp_path, clips_per_class=0)


# -- exit codes --------------------------------------------------------------

def test_usage_errors_exit_1(tmp_path, capsys):
    for argv in ([], ["bogus"], ["train"], ["crossval", "--features", "f", "--k", "x"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 1
    (tmp_path / "c.toml").write_text("[nope]\n")
    assert main(["summary", "--config", str(tmp_path / "c.toml")]) == 1
    assert main(["manifest", "--corpus", "TESS", "--corpus", "SAVEE", "--root", "x",
                 "--out", str(tmp_path / "m.jsonl")]) == 1


def test_data_errors_exit_2(tmp_path, capsys):
    assert main(["train", "--features", str(tmp_path / "none.serf"),
                 "--out", str(tmp_path / "m.dcrf")]) == 2
    assert main(["extract", "--manifest", str(tmp_path / "none.jsonl"),
                 "--out", str(tmp_path / "f.serf")]) == 2
    (tmp_path / "empty").mkdir()
    assert main(["manifest", "--corpus", "TESS", "--root", str(tmp_path / "empty"),
                 "--out", str(tmp_path / "m.jsonl")]) == 2
    assert main(["evaluate", "--checkpoint", str(tmp_path / "none.dcrf"),
                 "--features", str(tmp_path / "none.serf")]) == 2
    assert "data error" in capsys.readouterr().err


def test_non_finite_features_exit_3(tmp_path, capsys):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(28, 10))
    X[3, 2] = np.nan
    save_features(FeatureTable([f"T/{i}" for i in range(28)], np.arange(28) % 7, X),
                  tmp_path / "f.serf")
    (tmp_path / "c.toml").write_text(TINY)
    assert main(["train", "--features", str(tmp_path / "f.serf"), "--config",
                 str(tmp_path / "c.toml"), "--out", str(tmp_path / "m.dcrf")]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_summary_prints_full_size_counts(capsys):
    assert main(["summary"]) == 0
    out = capsys.readouterr().out
    assert "total 16273976  trainable 16267832  non-trainable 6144" in out
    assert "crf_layer" in out


# -- small pipeline ----------------------------------------------------------

def test_manifest_and_augment_commands(tmp_path, capsys):
    roots = build_fourteen(tmp_path / "data")
    argv = ["manifest", "--out", str(tmp_path / "m.jsonl")]
    for corpus, root in roots.items():
        argv += ["--corpus", corpus, "--root", str(root)]
    assert main(argv + ["--reference", "R+T+S+E+C"]) == 0
    assert "deviation from reference" in capsys.readouterr().out
    assert main(["augment", "--manifest", str(tmp_path / "m.jsonl"),
                 "--out", str(tmp_path / "a.jsonl"), "--seed", "3"]) == 0
    aug = DatasetManifest.load(tmp_path / "a.jsonl")
    assert len(aug) == 140
    assert main(["augment", "--plan", "none", "--manifest", str(tmp_path / "m.jsonl"),
                 "--out", str(tmp_path / "n.jsonl")]) == 0
    assert len(DatasetManifest.load(tmp_path / "n.jsonl")) == 14


def test_end_to_end_commands(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    assert main(["synth", "--out", str(corpus), "--per-class", "4"]) == 0
    m, p = str(tmp_path / "m.jsonl"), str(tmp_path / "p.jsonl")
    assert main(["manifest", "--corpus", "ravdess", "--root", str(corpus), "--out", m]) == 0
    assert main(["preprocess", "--manifest", m, "--out", p]) == 0
    assert all(e.preprocess for e in DatasetManifest.load(p))
    feats = str(tmp_path / "f.csv")
    assert main(["extract", "--manifest", p, "--out", feats, "--workers", "1"]) == 0
    table = load_features(feats)
    assert table.X.shape == (28, 190)

    cfg = tmp_path / "c.toml"
    cfg.write_text(TINY)
    ck = str(tmp_path / "m.dcrf")
    assert main(["train", "--features", feats, "--config", str(cfg), "--out", ck,
                 "--seed", "1", "--report", str(tmp_path / "rep")]) == 0
    ckpt = load_checkpoint(ck)
    assert ckpt.config.input_dim == 6 and len(ckpt.meta["history"]) == 3

    out = str(tmp_path / "metrics.json")
    assert main(["evaluate", "--checkpoint", ck, "--features", feats, "--out", out]) == 0
    reported = json.loads((tmp_path / "rep/metrics.json").read_text())
    assert json.loads(open(out).read())["accuracy"] == reported["accuracy"]

    assert main(["report", "--checkpoint", ck, "--features", feats,
                 "--out", str(tmp_path / "rep2")]) == 0
    assert sorted(f.name for f in (tmp_path / "rep2").iterdir()) == [
        "confusion_matrix.csv", "confusion_matrix.svg", "history.csv", "metrics.json"]

    assert main(["crossval", "--features", feats, "--config", str(cfg), "--k", "2",
                 "--epochs", "1", "--out", str(tmp_path / "cv")]) == 0
    doc = json.loads((tmp_path / "cv/crossval.json").read_text())
    assert doc["k"] == 2 and len(doc["folds"]) == 2

    wav_dir = tmp_path / "trimmed"
    assert main(["preprocess", "--manifest", m, "--out", str(tmp_path / "t.jsonl"),
                 "--wav-dir", str(wav_dir)]) == 0
    assert len(list(wav_dir.glob("*.wav"))) == 28
