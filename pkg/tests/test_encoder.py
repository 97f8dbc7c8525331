import math

import numpy as np
import pytest

from wellssl.encoder import (
    EncoderParams,
    NumericError,
    ShapeError,
    backward,
    encode,
    forward,
    init_params,
    load_checkpoint,
    lstm_forward,
    mlp_forward,
    save_checkpoint,
)

from gradcheck import finite_difference, relative_errors


def _scalar_lstm(w_ih, w_hh, b, x):
    """Step-by-step LSTM with plain Python floats."""
    H = len(w_hh[0])
    h = [0.0] * H
    c = [0.0] * H
    sig = lambda a: 1.0 / (1.0 + math.exp(-a))  # noqa: E731
    for row in x:
        pre = []
        for k in range(4 * H):
            s = b[k]
            for j, v in enumerate(row):
                s += w_ih[k][j] * v
            for j, v in enumerate(h):
                s += w_hh[k][j] * v
            pre.append(s)
        new_c, new_h = [], []
        for u in range(H):
            i = sig(pre[u])
            f = sig(pre[H + u])
            g = math.tanh(pre[2 * H + u])
            o = sig(pre[3 * H + u])
            cu = f * c[u] + i * g
            new_c.append(cu)
            new_h.append(o * math.tanh(cu))
        h, c = new_h, new_c
    return h


def test_lstm_matches_scalar_oracle(rng):
    p = init_params(2, 3, 4, 4, rng=rng)
    for k in ("lstm.w_ih", "lstm.w_hh", "lstm.b"):
        p.tensors[k] = rng.normal(size=p[k].shape)
    x = rng.normal(size=(4, 2))
    h, _ = lstm_forward(p, x)
    oracle = _scalar_lstm(p["lstm.w_ih"].tolist(), p["lstm.w_hh"].tolist(), p["lstm.b"].tolist(), x.tolist())
    np.testing.assert_allclose(h, oracle, atol=1e-12, rtol=0)


def test_lstm_zero_params_zero_output(rng):
    p = init_params(4, 8, 4, 4, rng=0)
    for v in p.tensors.values():
        v[...] = 0.0
    h, _ = lstm_forward(p, rng.normal(size=(3, 20, 4)) * 5)
    assert np.all(h == 0.0)
    assert np.all(encode(p, rng.normal(size=(100, 4))) == 0.0)


def test_lstm_batch_equals_single(rng):
    p = init_params(4, 6, 4, 4, rng=1)
    x = rng.normal(size=(5, 15, 4))
    hb, _ = lstm_forward(p, x)
    for i in range(5):
        np.testing.assert_allclose(hb[i], lstm_forward(p, x[i])[0], atol=1e-14)


def test_lstm_rejects_nonfinite(rng):
    p = init_params(4, 4, 4, 4)
    x = rng.normal(size=(10, 4))
    x[3, 1] = np.inf
    with pytest.raises(NumericError):
        lstm_forward(p, x)
    with pytest.raises(ShapeError):
        lstm_forward(p, np.zeros((10, 3)))


def test_lstm_activations_finite_for_large_inputs(rng):
    p = init_params(4, 64, 8, 8, rng=2)
    x = rng.uniform(-10, 10, size=(8, 100, 4))
    _, cache = lstm_forward(p, x)
    assert all(np.all(np.isfinite(cache[k])) for k in ("gates", "cs", "hs"))


def test_encode_dims_and_determinism(rng):
    p = init_params(rng=3, head_hidden=16, head_out=16)
    x = rng.normal(size=(100, 4))
    e1, e2 = encode(p, x), encode(p, x)
    assert e1.shape == (64,)
    assert e1.tobytes() == e2.tobytes()
    assert encode(p, np.stack([x, x])).shape == (2, 64)


def test_mlp_zero_and_identity():
    zero = {"w1": np.zeros((3, 2)), "b1": np.zeros(3), "w2": np.zeros((5, 3)), "b2": np.zeros(5)}
    assert np.all(mlp_forward(zero, np.ones(2))[0] == 0.0)
    one = {"w1": np.ones((1, 1)), "b1": np.zeros(1), "w2": np.ones((1, 1)), "b2": np.zeros(1)}
    assert mlp_forward(one, np.array([2.0]))[0][0] == 2.0
    with pytest.raises(ShapeError):
        mlp_forward(one, np.ones(3))


def test_byol_head_dims(rng):
    p = init_params(4, 64, 4096, 256, predictor=True, rng=0)
    out, _ = mlp_forward(p.head("projector"), rng.normal(size=64))
    assert out.shape == (256,)
    assert p["predictor.w1"].shape == (4096, 256) and p["predictor.w2"].shape == (256, 4096)


def test_backward_zero_upstream(rng):
    p = init_params(4, 5, 6, 7, predictor=True, rng=4)
    out, caches = forward(p, rng.normal(size=(3, 10, 4)))
    grads = backward(p, np.zeros_like(out), caches)
    assert set(grads) == set(p.tensors)
    assert all(np.all(g == 0) and g.shape == p[k].shape for k, g in grads.items())


@pytest.mark.parametrize("upto", ["encoder", "projector", "predictor"])
def test_backward_sum_of_outputs_matches_fd(rng, upto):
    p = init_params(2, 3, 5, 4, predictor=True, rng=5)
    x = rng.normal(size=(2, 4, 2))

    def loss(params):
        return forward(params, x, upto=upto)[0].sum()

    out, caches = forward(p, x, upto=upto)
    grads = backward(p, np.ones_like(out), caches)
    numeric = finite_difference(loss, p)
    errs = relative_errors(grads, numeric)
    assert max(errs.values()) < 1e-4, errs
    if upto != "predictor":
        assert all(np.all(grads[k] == 0) for k in grads if k.startswith("predictor"))


def test_checkpoint_round_trip(tmp_path):
    p = init_params(4, 8, 16, 16, predictor=True, rng=6)
    save_checkpoint(tmp_path / "a.ckpt", p, {"method": "byol"})
    back, meta = load_checkpoint(tmp_path / "a.ckpt")
    assert meta["method"] == "byol"
    assert list(back.tensors) == list(p.tensors)
    for k in p.tensors:
        assert back[k].tobytes() == p[k].tobytes()
    save_checkpoint(tmp_path / "b.ckpt", back, {"method": "byol"})
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_without_predictor():
    p = init_params(4, 4, 4, 4, predictor=True)
    t = p.without_predictor()
    assert p.has_predictor and not t.has_predictor
    assert isinstance(t, EncoderParams)
