import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wellssl.optim import EarlyStopper, EMAConfig, LARSConfig, LARSState, cosine_lr, ema_update, lars_step


@pytest.mark.parametrize("epoch, expected", [(0, 0.1), (5, 0.05), (10, 0.0)])
def test_cosine_spot_values(epoch, expected):
    assert cosine_lr(epoch, 0.1, 10) == pytest.approx(expected, abs=1e-15)


def test_cosine_rises_after_t_max():
    assert cosine_lr(15, 0.1, 10) == pytest.approx(0.05)
    assert cosine_lr(20, 0.1, 10) == pytest.approx(0.1)


def test_lars_null_update():
    w = {"w": np.array([[1.0, -2.0], [0.5, 3.0]])}
    before = w["w"].copy()
    lars_step(w, {"w": np.zeros((2, 2))}, LARSConfig(weight_decay=0.0), LARSState(), lr=0.1)
    np.testing.assert_array_equal(w["w"], before)


def test_lars_trust_ratio_magnitude():
    w = {"w": np.array([1.0, 0.0])}
    g = {"w": np.array([0.0, 1.0])}
    cfg = LARSConfig(trust_coefficient=1e-3, momentum=0.0, weight_decay=0.0)
    lars_step(w, g, cfg, LARSState(), lr=0.1)
    step = np.linalg.norm(w["w"] - np.array([1.0, 0.0]))
    assert step == pytest.approx(1e-3 * 0.1 * 1.0, rel=1e-12)


def _sgd_momentum(w, g, buf, lr, momentum, wd):
    g = g + wd * w
    buf = momentum * buf + lr * g
    return w - buf, buf


def test_lars_bias_excluded_is_sgd(rng):
    cfg = LARSConfig(exclude_bias_from_adaptation=True, momentum=0.9, weight_decay=1e-6)
    params = {"head.w1": rng.normal(size=(3, 2)), "head.b1": rng.normal(size=3)}
    state = LARSState()
    ref_w, ref_buf = params["head.b1"].copy(), np.zeros(3)
    for _ in range(3):
        grads = {k: rng.normal(size=v.shape) for k, v in params.items()}
        ref_w, ref_buf = _sgd_momentum(ref_w, grads["head.b1"], ref_buf, 0.1, 0.9, 1e-6)
        lars_step(params, grads, cfg, state, lr=0.1)
        np.testing.assert_allclose(params["head.b1"], ref_w, atol=1e-12)


def test_lars_all_excluded_equals_momentum_sgd(rng):
    cfg = LARSConfig(momentum=0.9, weight_decay=1e-4)
    params = {k: rng.normal(size=s) for k, s in (("a", (4, 3)), ("b", (5,)))}
    ref = {k: v.copy() for k, v in params.items()}
    bufs = {k: np.zeros_like(v) for k, v in params.items()}
    state = LARSState()
    for step in range(5):
        grads = {k: rng.normal(size=v.shape) for k, v in params.items()}
        lr = cosine_lr(step, 0.1, 10)
        lars_step(params, grads, cfg, state, lr, exclude=lambda name: True)
        for k in ref:
            ref[k], bufs[k] = _sgd_momentum(ref[k], grads[k], bufs[k], lr, 0.9, 1e-4)
            np.testing.assert_allclose(params[k], ref[k], atol=1e-12, rtol=0)


def test_lars_shape_mismatch():
    with pytest.raises(ValueError):
        lars_step({"w": np.zeros(3)}, {"w": np.zeros(4)}, LARSConfig(), LARSState(), 0.1)


def test_lars_config_validation():
    with pytest.raises(ValueError):
        LARSConfig(momentum=1.0)
    with pytest.raises(ValueError):
        LARSConfig(trust_coefficient=0.0)
    with pytest.raises(ValueError):
        EMAConfig(momentum=1.0)


def test_ema_spot_values():
    t = {"w": np.zeros(3)}
    ema_update(t, {"w": np.ones(3)}, 0.99)
    np.testing.assert_allclose(t["w"], 0.01, atol=1e-15)
    t = {"w": np.array([5.0, -1.0])}
    ema_update(t, {"w": np.array([2.0, 7.0])}, 0.0)
    np.testing.assert_array_equal(t["w"], [2.0, 7.0])


def test_ema_ignores_student_only_tensors():
    t = {"w": np.zeros(2)}
    ema_update(t, {"w": np.ones(2), "predictor.w1": np.ones(5)}, 0.5)
    assert set(t) == {"w"}


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, 6, elements=st.floats(-100, 100)),
    arrays(np.float64, 6, elements=st.floats(-100, 100)),
    st.floats(0.0, 0.999),
)
def test_ema_contraction(teacher, student, m):
    t = {"w": teacher.copy()}
    ema_update(t, {"w": student}, m)
    assert np.linalg.norm(t["w"] - student) == pytest.approx(m * np.linalg.norm(teacher - student), rel=1e-9, abs=1e-9)
    same = {"w": student.copy()}
    ema_update(same, {"w": student}, m)
    np.testing.assert_allclose(same["w"], student, rtol=1e-15, atol=1e-13)


def test_early_stopper_patience_arithmetic():
    s = EarlyStopper(patience=10)
    stops = [s.update(e, float(e)) for e in range(1, 30)]
    assert stops.index(True) + 1 == 11
    assert s.best_epoch == 1


def test_early_stopper_resets_on_improvement():
    s = EarlyStopper(patience=3)
    seq = [5, 6, 7, 4, 5, 6, 7]
    stops = [s.update(e, v) for e, v in enumerate(seq, 1)]
    assert stops == [False, False, False, False, False, False, True]
    assert s.best_epoch == 4 and math.isclose(s.best, 4)
