# SPDX-License-Identifier: Apache-2.0
import numpy as np
import pytest

import unigc

DIAG = {"g": "", "st": "c", "sc": "t", "tc": "j", "s": "tc", "t": "jc", "c": "tj"}


def numpy_mask(kind, T, J, C):
    t1, j1, c1, t2, j2, c2 = np.indices((T, J, C, T, J, C))
    m = np.ones((T, J, C, T, J, C))
    if "t" in DIAG[kind]:
        m *= t1 == t2
    if "j" in DIAG[kind]:
        m *= j1 == j2
    if "c" in DIAG[kind]:
        m *= c1 == c2
    return m


def test_general_matches_einsum():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (3, 4, 2))
    a = rng.uniform(-1, 1, (3, 4, 2, 3, 4, 2))
    np.testing.assert_allclose(unigc.unigc_general(x, a), np.einsum("abcdef,def->abc", a, x), atol=1e-12)


@pytest.mark.parametrize("kind", unigc.KINDS)
def test_masks_and_factored_form(kind):
    rng = np.random.default_rng(1)
    T, J, C = 4, 5, 3
    np.testing.assert_array_equal(unigc.build_mask(kind, T, J, C), numpy_mask(kind, T, J, C))
    x = rng.uniform(-1, 1, (T, J, C))
    for tied in ([False] if kind == "g" else [False, True]):
        blocks = rng.uniform(-1, 1, unigc.block_shape(kind, tied, T, J, C))
        dense = unigc.expand_to_global(blocks, kind, tied, T, J, C)
        expected = np.einsum("abcdef,def->abc", dense * numpy_mask(kind, T, J, C), x)
        np.testing.assert_allclose(unigc.conv_factored(x, blocks, kind, tied), expected, atol=1e-9)
        np.testing.assert_allclose(unigc.unigc_masked(x, dense, kind), expected, atol=1e-12)


def test_counts():
    assert unigc.param_count("g", False, 10, 22, 3) == 435600
    assert unigc.param_count("sc", True, 10, 22, 3) == 4356
    assert unigc.param_count("st", True, 10, 22, 3) == 48400
    assert unigc.flops_conv("sc", True, 10, 22, 3) == 87120
    assert unigc.flops_conv("s", False, 10, 22, 3) == 29040


def test_motion_helpers():
    assert unigc.mpjpe(np.array([[[3.0, 4.0, 0.0]]]), np.zeros((1, 1, 3))) == 5.0
    history, future = unigc.gen_synthetic(n=2)[1]
    assert history.shape == (10, 7, 3) and future.shape == (10, 7, 3)
    zv = unigc.zero_velocity(history, 10)
    assert np.all(zv == history[-1])
    with pytest.raises(ValueError):
        unigc.mpjpe(np.zeros((1, 2, 3)), np.zeros((1, 3, 3)))


def test_model_predict_and_checkpoint(tmp_path):
    model = unigc.Model.from_config("layers = 2\nhidden = 8\n", seed=3)
    history, _ = unigc.gen_synthetic(n=1)[0]
    pred, chosen = model.predict(history)
    assert pred.shape == (10, 7, 3) and np.all(np.isfinite(pred))
    assert len(chosen) == 2 and all(0 <= c < 4 for c in chosen)
    still = np.repeat(history[-1:], 10, axis=0)
    np.testing.assert_array_equal(model.predict(still)[0], unigc.zero_velocity(still, 10))
    path = str(tmp_path / "m.ugck")
    model.save(path)
    again = unigc.Model.load(path)
    assert again.parameter_names() == model.parameter_names()
    for name in model.parameter_names():
        np.testing.assert_array_equal(again.parameter(name), model.parameter(name))
    assert model.cost_csv().count("\n") == 4


def test_errors():
    with pytest.raises(unigc.ConfigError):
        unigc.Model.from_config("widht = 3\n")
    with pytest.raises(ValueError):
        unigc.build_mask("xx", 2, 2, 2)
    with pytest.raises(OSError):
        unigc.Model.load("/nonexistent/model.ugck")


def test_verify_suites_pass():
    ok, report = unigc.verify()
    assert ok, report
    assert report.count("PASS") == 5
