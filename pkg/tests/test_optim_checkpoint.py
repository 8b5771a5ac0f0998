import numpy as np
import pytest

from dcrfser.errors import DataError, ShapeMismatch
from dcrfser.features import fit_standardizer, pca_fit
from dcrfser.model import AdamState, Checkpoint, ModelConfig, adam_step, init_params
from dcrfser.model import load_checkpoint, predict_proba, save_checkpoint
from dcrfser.model.checkpoint import MAGIC


# -- Adam --------------------------------------------------------------------

def test_defaults():
    s = AdamState()
    assert (s.lr, s.beta1, s.beta2, s.eps, s.step) == (1e-4, 0.9, 0.999, 1e-8, 0)


def test_zero_gradient_leaves_parameters():
    p = {"w": np.array([1.0, -2.0])}
    adam_step(AdamState(), p, {"w": np.zeros(2)})
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])


@pytest.mark.parametrize("g", [3.0, -0.02])
def test_first_step_moves_by_lr(g):
    p = {"x": np.array([0.5])}
    s = AdamState()
    adam_step(s, p, {"x": np.array([g])})
    assert p["x"][0] - 0.5 == pytest.approx(-1e-4 * np.sign(g), abs=1e-6)
    assert s.step == 1 and s.m["x"].shape == (1,)


def test_minimizes_a_parabola():
    p = {"x": np.array([1.0])}
    s = AdamState(lr=1e-2)
    for _ in range(5000):
        adam_step(s, p, {"x": 2 * p["x"]})
    assert abs(p["x"][0]) < 1e-2


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        adam_step(AdamState(), {"w": np.zeros(3)}, {"w": np.zeros(2)})


# -- checkpoints -------------------------------------------------------------

CFG = ModelConfig(input_dim=5, lstm_units=4, dense_units=6, loss_mode="crf_nll")


def make_checkpoint(with_prep=True):
    params = init_params(CFG, seed=3)
    params["crf/transitions"] += 0.25
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 8))
    std = fit_standardizer(X) if with_prep else None
    pca = pca_fit(std.transform(X), n_components=5) if with_prep else None
    return Checkpoint(CFG, params, {"classes": ["a", "b"], "best_epoch": 4}, std, pca)


def test_round_trip_is_exact(tmp_path):
    ck = make_checkpoint()
    save_checkpoint(tmp_path / "m.dcrf", ck)
    back = load_checkpoint(tmp_path / "m.dcrf")
    assert back.config == CFG and back.meta == ck.meta
    assert set(back.params) == set(ck.params)
    for k in ck.params:
        assert back.params[k].dtype == np.float32
        np.testing.assert_array_equal(back.params[k], ck.params[k])
    np.testing.assert_array_equal(back.standardizer.means, ck.standardizer.means)
    np.testing.assert_array_equal(back.pca.components, ck.pca.components)
    assert back.pca.total_variance == ck.pca.total_variance
    x = np.random.default_rng(1).normal(size=(3, 1, 5))
    np.testing.assert_array_equal(predict_proba(back.params, x, CFG),
                                  predict_proba(ck.params, x, CFG))


def test_without_input_transform(tmp_path):
    save_checkpoint(tmp_path / "m.dcrf", make_checkpoint(with_prep=False))
    back = load_checkpoint(tmp_path / "m.dcrf")
    assert back.standardizer is None and back.pca is None


def test_header_bytes(tmp_path):
    save_checkpoint(tmp_path / "m.dcrf", make_checkpoint())
    assert (tmp_path / "m.dcrf").read_bytes()[:5] == MAGIC + b"\x01"


def test_bad_files(tmp_path):
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "absent.dcrf")
    save_checkpoint(tmp_path / "m.dcrf", make_checkpoint())
    raw = (tmp_path / "m.dcrf").read_bytes()
    for name, blob in [("magic", b"XXXX" + raw[4:]), ("cut", raw[: len(raw) // 2]),
                       ("version", raw[:4] + b"\x09" + raw[5:]), ("tiny", raw[:6])]:
        (tmp_path / name).write_bytes(blob)
        with pytest.raises(DataError):
            load_checkpoint(tmp_path / name)
