"""Dense and recurrent nets with hand-written backpropagation.

Parameters live in plain dicts of float64 arrays so the optimizer and the
finite-difference tests can treat every architecture uniformly.  All
forward passes end in a sigmoid, so outputs are probabilities in (0,1).

Architectures:
  ffnn1      one ReLU hidden layer on a flat input vector
  ffnn2      a small ReLU subnet per feature over its day window, their
             outputs concatenated into a shared ReLU layer
  recurrent  a recurrent cell over the day sequence; "gated" is a
             standard 4-gate cell (gate order: input, forget, candidate,
             output), "simple" is a plain tanh recurrence
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ARCHITECTURES = ("ffnn1", "ffnn2", "recurrent")
CELLS = ("gated", "simple")


@dataclass(frozen=True)
class NetSpec:
    arch: str
    hidden: int = 64
    per_feature_hidden: int = 8  # ffnn2 only
    cell: str = "gated"          # recurrent only

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.hidden < 1 or self.per_feature_hidden < 1:
            raise ValueError("hidden widths must be >= 1")
        if self.cell not in CELLS:
            raise ValueError(f"unknown recurrent cell {self.cell!r}")


def input_kind(spec: NetSpec) -> str:
    """"flat" (n, d) input or "seq" (n, dt, m) input."""
    return "flat" if spec.arch == "ffnn1" else "seq"


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(z):
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _uniform(rng, fan_in, shape):
    s = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-s, s, size=shape)


def init_params(spec: NetSpec, input_shape, rng) -> dict:
    """Seeded uniform(+-1/sqrt(fan_in)) weights, zero biases.

    input_shape: (d,) for flat input, (dt, m) for sequence input.
    """
    k = spec.hidden
    if spec.arch == "ffnn1":
        (d,) = input_shape
        return {"W0": _uniform(rng, d, (k, d)), "b0": np.zeros(k),
                "w1": _uniform(rng, k, (k,)), "b1": np.zeros(1)}
    if spec.arch == "ffnn2":
        dt, m = input_shape
        q = spec.per_feature_hidden
        return {"Wf": _uniform(rng, dt, (m, q, dt)), "bf": np.zeros((m, q)),
                "W1": _uniform(rng, m * q, (k, m * q)), "b1": np.zeros(k),
                "w2": _uniform(rng, k, (k,)), "b2": np.zeros(1)}
    dt, m = input_shape
    if spec.cell == "simple":
        return {"W": _uniform(rng, m + k, (k, m + k)), "b": np.zeros(k),
                "wo": _uniform(rng, k, (k,)), "bo": np.zeros(1)}
    return {"Wg": _uniform(rng, m + k, (4 * k, m + k)), "bg": np.zeros(4 * k),
            "wo": _uniform(rng, k, (k,)), "bo": np.zeros(1)}


def forward(spec: NetSpec, params: dict, X):
    """Batch forward pass -> (probabilities, cache for backward)."""
    if spec.arch == "ffnn1":
        return _forward_ffnn1(params, X)
    if spec.arch == "ffnn2":
        return _forward_ffnn2(params, X)
    if spec.cell == "simple":
        return _forward_simple(params, X)
    return _forward_gated(params, X)


def backward(spec: NetSpec, params: dict, cache, dlogit) -> dict:
    """Gradients of the loss given d(loss)/d(logit) per batch row."""
    if spec.arch == "ffnn1":
        return _backward_ffnn1(params, cache, dlogit)
    if spec.arch == "ffnn2":
        return _backward_ffnn2(params, cache, dlogit)
    if spec.cell == "simple":
        return _backward_simple(params, cache, dlogit)
    return _backward_gated(params, cache, dlogit)


def predict_proba(spec: NetSpec, params: dict, X) -> np.ndarray:
    return forward(spec, params, X)[0]


# ---------------------------------------------------------------- ffnn1

def _forward_ffnn1(params, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params["W0"].shape[1]:
        raise ValueError(f"expected (batch, {params['W0'].shape[1]}) input")
    z0 = X @ params["W0"].T + params["b0"]
    a = relu(z0)
    logit = a @ params["w1"] + params["b1"][0]
    return sigmoid(logit), (X, z0, a)


def _backward_ffnn1(params, cache, dlogit):
    X, z0, a = cache
    da = dlogit[:, None] * params["w1"][None, :]
    dz0 = da * (z0 > 0)
    return {"W0": dz0.T @ X, "b0": dz0.sum(axis=0),
            "w1": a.T @ dlogit, "b1": np.array([dlogit.sum()])}


# ---------------------------------------------------------------- ffnn2

def _forward_ffnn2(params, X):
    X = np.asarray(X, dtype=float)
    m, q, dt = params["Wf"].shape
    if X.ndim != 3 or X.shape[1] != dt or X.shape[2] != m:
        raise ValueError(f"expected (batch, {dt}, {m}) input")
    z1 = np.einsum("btj,jqt->bjq", X, params["Wf"]) + params["bf"]
    g = relu(z1)
    gf = g.reshape(X.shape[0], m * q)
    z2 = gf @ params["W1"].T + params["b1"]
    a2 = relu(z2)
    logit = a2 @ params["w2"] + params["b2"][0]
    return sigmoid(logit), (X, z1, gf, z2, a2)


def _backward_ffnn2(params, cache, dlogit):
    X, z1, gf, z2, a2 = cache
    m, q, dt = params["Wf"].shape
    da2 = dlogit[:, None] * params["w2"][None, :]
    dz2 = da2 * (z2 > 0)
    dgf = dz2 @ params["W1"]
    dz1 = dgf.reshape(z1.shape) * (z1 > 0)
    return {"Wf": np.einsum("bjq,btj->jqt", dz1, X),
            "bf": dz1.sum(axis=0),
            "W1": dz2.T @ gf, "b1": dz2.sum(axis=0),
            "w2": a2.T @ dlogit, "b2": np.array([dlogit.sum()])}


# ------------------------------------------------------ simple recurrent

def _forward_simple(params, X):
    X = np.asarray(X, dtype=float)
    k = params["b"].shape[0]
    m = params["W"].shape[1] - k
    if X.ndim != 3 or X.shape[2] != m:
        raise ValueError(f"expected (batch, steps, {m}) input")
    if X.shape[1] < 1:
        raise ValueError("sequence length must be >= 1")
    B, T = X.shape[0], X.shape[1]
    hs = np.zeros((T + 1, B, k))
    for t in range(T):
        cat = np.concatenate([X[:, t, :], hs[t]], axis=1)
        hs[t + 1] = np.tanh(cat @ params["W"].T + params["b"])
    logit = hs[T] @ params["wo"] + params["bo"][0]
    return sigmoid(logit), (X, hs)


def _backward_simple(params, cache, dlogit):
    X, hs = cache
    k = params["b"].shape[0]
    m = params["W"].shape[1] - k
    B, T = X.shape[0], X.shape[1]
    dW = np.zeros_like(params["W"])
    db = np.zeros_like(params["b"])
    dh = dlogit[:, None] * params["wo"][None, :]
    for t in range(T - 1, -1, -1):
        dpre = dh * (1.0 - hs[t + 1] ** 2)
        cat = np.concatenate([X[:, t, :], hs[t]], axis=1)
        dW += dpre.T @ cat
        db += dpre.sum(axis=0)
        dh = dpre @ params["W"][:, m:]
    return {"W": dW, "b": db, "wo": hs[T].T @ dlogit,
            "bo": np.array([dlogit.sum()])}


# ------------------------------------------------------- gated recurrent

def _forward_gated(params, X):
    X = np.asarray(X, dtype=float)
    k = params["bg"].shape[0] // 4
    m = params["Wg"].shape[1] - k
    if X.ndim != 3 or X.shape[2] != m:
        raise ValueError(f"expected (batch, steps, {m}) input")
    if X.shape[1] < 1:
        raise ValueError("sequence length must be >= 1")
    B, T = X.shape[0], X.shape[1]
    hs = np.zeros((T + 1, B, k))
    cs = np.zeros((T + 1, B, k))
    gates = np.zeros((T, 4, B, k))
    for t in range(T):
        cat = np.concatenate([X[:, t, :], hs[t]], axis=1)
        z = cat @ params["Wg"].T + params["bg"]
        i = sigmoid(z[:, 0 * k:1 * k])
        f = sigmoid(z[:, 1 * k:2 * k])
        g = np.tanh(z[:, 2 * k:3 * k])
        o = sigmoid(z[:, 3 * k:4 * k])
        cs[t + 1] = f * cs[t] + i * g
        hs[t + 1] = o * np.tanh(cs[t + 1])
        gates[t] = (i, f, g, o)
    logit = hs[T] @ params["wo"] + params["bo"][0]
    return sigmoid(logit), (X, hs, cs, gates)


def _backward_gated(params, cache, dlogit):
    X, hs, cs, gates = cache
    k = params["bg"].shape[0] // 4
    m = params["Wg"].shape[1] - k
    B, T = X.shape[0], X.shape[1]
    dWg = np.zeros_like(params["Wg"])
    dbg = np.zeros_like(params["bg"])
    dh = dlogit[:, None] * params["wo"][None, :]
    dc = np.zeros((B, k))
    for t in range(T - 1, -1, -1):
        i, f, g, o = gates[t]
        tc = np.tanh(cs[t + 1])
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc ** 2)
        di = dc * g
        dg = dc * i
        df = dc * cs[t]
        dz = np.concatenate([di * i * (1.0 - i), df * f * (1.0 - f),
                             dg * (1.0 - g ** 2), do * o * (1.0 - o)], axis=1)
        cat = np.concatenate([X[:, t, :], hs[t]], axis=1)
        dWg += dz.T @ cat
        dbg += dz.sum(axis=0)
        dcat = dz @ params["Wg"]
        dh = dcat[:, m:]
        dc = dc * f
    return {"Wg": dWg, "bg": dbg, "wo": hs[T].T @ dlogit,
            "bo": np.array([dlogit.sum()])}
