"""LSTM interval encoder with projector/predictor MLP heads and analytic gradients.

Parameters live in a flat ``{name: array}`` mapping so optimizers and the
checkpoint writer can treat every tensor uniformly. Gate order in the
stacked LSTM weights is (input, forget, cell candidate, output).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .storage import load_tensors, save_tensors

LSTM_KEYS = ("lstm.w_ih", "lstm.w_hh", "lstm.b")
HEAD_KEYS = ("w1", "b1", "w2", "b2")


class NumericError(ArithmeticError):
    pass


class ShapeError(ValueError):
    pass


@dataclass
class EncoderParams:
    tensors: dict[str, np.ndarray]

    @property
    def hidden_size(self) -> int:
        return self.tensors["lstm.w_hh"].shape[1]

    @property
    def input_size(self) -> int:
        return self.tensors["lstm.w_ih"].shape[1]

    @property
    def has_predictor(self) -> bool:
        return "predictor.w1" in self.tensors

    def head(self, prefix: str) -> dict[str, np.ndarray]:
        return {k: self.tensors[f"{prefix}.{k}"] for k in HEAD_KEYS}

    def copy(self) -> EncoderParams:
        return EncoderParams({k: v.copy() for k, v in self.tensors.items()})

    def without_predictor(self) -> EncoderParams:
        return EncoderParams({k: v.copy() for k, v in self.tensors.items() if not k.startswith("predictor.")})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def __getitem__(self, key):
        return self.tensors[key]

    def __iter__(self):
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()


def is_bias(name: str) -> bool:
    return name.rsplit(".", 1)[-1].startswith("b")


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_params(
    input_size: int = 4,
    hidden_size: int = 64,
    head_hidden: int = 2048,
    head_out: int = 2048,
    predictor: bool = False,
    rng: np.random.Generator | int = 0,
) -> EncoderParams:
    """Uniform(+-1/sqrt(fan_in)) initialization for every tensor."""
    rng = np.random.default_rng(rng)
    H = hidden_size
    t = {
        "lstm.w_ih": _uniform(rng, (4 * H, input_size), H),
        "lstm.w_hh": _uniform(rng, (4 * H, H), H),
        "lstm.b": _uniform(rng, (4 * H,), H),
    }
    t.update(_init_head(rng, "projector", H, head_hidden, head_out))
    if predictor:
        t.update(_init_head(rng, "predictor", head_out, head_hidden, head_out))
    return EncoderParams(t)


def _init_head(rng, prefix, n_in, n_hidden, n_out):
    return {
        f"{prefix}.w1": _uniform(rng, (n_hidden, n_in), n_in),
        f"{prefix}.b1": _uniform(rng, (n_hidden,), n_in),
        f"{prefix}.w2": _uniform(rng, (n_out, n_hidden), n_hidden),
        f"{prefix}.b2": _uniform(rng, (n_out,), n_hidden),
    }


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def lstm_forward(p, x: np.ndarray):
    """Run the LSTM over ``x`` of shape (N, l, d) or (l, d); return the final hidden state.

    Initial hidden and cell states are zero.
    """
    w_ih, w_hh, b = p["lstm.w_ih"], p["lstm.w_hh"], p["lstm.b"]
    single = x.ndim == 2
    xb = x[None] if single else x
    if xb.ndim != 3 or xb.shape[2] != w_ih.shape[1]:
        raise ShapeError(f"expected input (N, l, {w_ih.shape[1]}), got {x.shape}")
    if not np.all(np.isfinite(xb)):
        raise NumericError("non-finite value in LSTM input")
    N, l, _ = xb.shape
    H = w_hh.shape[1]
    xs = np.ascontiguousarray(xb.transpose(1, 0, 2))  # (l, N, d)
    pre_x = xs @ w_ih.T + b  # input contributions for all steps at once
    gates = np.empty((l, N, 4 * H))
    cs = np.empty((l + 1, N, H))
    hs = np.empty((l + 1, N, H))
    tcs = np.empty((l, N, H))
    cs[0] = 0.0
    hs[0] = 0.0
    for t in range(l):
        a = pre_x[t] + hs[t] @ w_hh.T
        g = gates[t]
        g[:, : 2 * H] = _sigmoid(a[:, : 2 * H])
        g[:, 2 * H : 3 * H] = np.tanh(a[:, 2 * H : 3 * H])
        g[:, 3 * H :] = _sigmoid(a[:, 3 * H :])
        i, f, gg, o = g[:, :H], g[:, H : 2 * H], g[:, 2 * H : 3 * H], g[:, 3 * H :]
        cs[t + 1] = f * cs[t] + i * gg
        tcs[t] = np.tanh(cs[t + 1])
        hs[t + 1] = o * tcs[t]
    h = hs[l]
    cache = {"xs": xs, "gates": gates, "cs": cs, "hs": hs, "tcs": tcs, "single": single}
    return (h[0] if single else h), cache


def lstm_backward(p, dh: np.ndarray, cache) -> dict[str, np.ndarray]:
    """Backpropagation through time from a gradient on the final hidden state."""
    w_hh = p["lstm.w_hh"]
    H = w_hh.shape[1]
    xs, gates, cs, hs, tcs = cache["xs"], cache["gates"], cache["cs"], cache["hs"], cache["tcs"]
    l, N, _ = gates.shape
    dh = np.atleast_2d(dh).astype(float)
    if dh.shape != (N, H):
        raise ShapeError(f"upstream gradient shape {dh.shape} does not match cache ({N}, {H})")
    dc = np.zeros((N, H))
    da_all = np.empty((l, N, 4 * H))
    for t in range(l - 1, -1, -1):
        g = gates[t]
        i, f, gg, o = g[:, :H], g[:, H : 2 * H], g[:, 2 * H : 3 * H], g[:, 3 * H :]
        tc = tcs[t]
        dc = dc + dh * o * (1.0 - tc * tc)
        da = da_all[t]
        da[:, :H] = dc * gg * i * (1.0 - i)
        da[:, H : 2 * H] = dc * cs[t] * f * (1.0 - f)
        da[:, 2 * H : 3 * H] = dc * i * (1.0 - gg * gg)
        da[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dc = dc * f
        dh = da @ w_hh
    flat = da_all.reshape(l * N, 4 * H)
    return {
        "lstm.w_ih": flat.T @ xs.reshape(l * N, -1),
        "lstm.w_hh": flat.T @ hs[:l].reshape(l * N, H),
        "lstm.b": flat.sum(axis=0),
    }


def mlp_forward(head: dict[str, np.ndarray], v: np.ndarray):
    """affine -> ReLU -> affine. ``head`` holds w1, b1, w2, b2."""
    w1, b1, w2, b2 = (head[k] for k in HEAD_KEYS)
    if v.shape[-1] != w1.shape[1]:
        raise ShapeError(f"head expects input dim {w1.shape[1]}, got {v.shape[-1]}")
    z = v @ w1.T + b1
    a = np.maximum(z, 0.0)
    return a @ w2.T + b2, {"v": v, "z": z, "a": a}


def mlp_backward(head, dout: np.ndarray, cache):
    """Return (parameter grads keyed w1..b2, grad w.r.t. the head input)."""
    a, z, v = cache["a"], cache["z"], cache["v"]
    dout2 = np.atleast_2d(dout)
    a2, v2 = np.atleast_2d(a), np.atleast_2d(v)
    dz = (dout2 @ head["w2"]) * (np.atleast_2d(z) > 0)
    grads = {
        "w2": dout2.T @ a2,
        "b2": dout2.sum(axis=0),
        "w1": dz.T @ v2,
        "b1": dz.sum(axis=0),
    }
    dv = dz @ head["w1"]
    return grads, dv.reshape(np.shape(v))


def forward(params: EncoderParams, x: np.ndarray, upto: str = "predictor"):
    """Encoder followed by the heads up to ``upto`` ("encoder", "projector" or "predictor").

    "predictor" falls back to "projector" when the params carry no predictor.
    """
    h, lcache = lstm_forward(params, x)
    caches = [("lstm", lcache)]
    out = h
    stages = {"encoder": (), "projector": ("projector",), "predictor": ("projector", "predictor")}[upto]
    for prefix in stages:
        if prefix == "predictor" and not params.has_predictor:
            break
        out, c = mlp_forward(params.head(prefix), out)
        caches.append((prefix, c))
    return out, caches


def backward(params: EncoderParams, dout: np.ndarray, caches) -> dict[str, np.ndarray]:
    """Gradients of every parameter for an upstream gradient on the ``forward`` output.

    Tensors not on the forward path get zero gradients, so the result always
    mirrors ``params`` shape for shape.
    """
    grads = params.zeros_like()
    d = dout
    for name, cache in reversed(caches):
        if name == "lstm":
            for k, g in lstm_backward(params, d, cache).items():
                grads[k] += g
        else:
            if f"{name}.w1" not in params.tensors:
                raise ShapeError(f"cache refers to head {name!r} missing from params")
            hg, d = mlp_backward(params.head(name), d, cache)
            for k, g in hg.items():
                grads[f"{name}.{k}"] += g
    return grads


def encode(params: EncoderParams, x, batch_size: int = 512) -> np.ndarray:
    """Embedding = final LSTM hidden state. Accepts an Interval, an (l, d) or an (N, l, d) array."""
    x = np.asarray(getattr(x, "values", x), dtype=float)
    if x.ndim == 2:
        return lstm_forward(params, x)[0]
    parts = [lstm_forward(params, x[i : i + batch_size])[0] for i in range(0, len(x), batch_size)]
    return np.concatenate(parts) if parts else np.zeros((0, params.hidden_size))


def save_checkpoint(path, params: EncoderParams, meta: dict | None = None) -> None:
    save_tensors(path, params.tensors, meta={"kind": "checkpoint", **(meta or {})})


def load_checkpoint(path) -> tuple[EncoderParams, dict]:
    tensors, meta = load_tensors(path)
    if meta.get("kind") != "checkpoint":
        raise ValueError(f"{path}: not an encoder checkpoint")
    return EncoderParams(tensors), meta
