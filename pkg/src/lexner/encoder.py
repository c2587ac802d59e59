"""Bidirectional GRU over per-character vectors.

One step (the update gate drives the candidate):

    z = sigmoid(W_z x + U_z h + b_z)
    r = sigmoid(W_r x + U_r h + b_r)
    c = tanh(W_h x + U_h (r * h) + b_h)
    h' = (1 - z) * h + z * c

Both directions start from zero states; position i's hidden state is the
concatenation [fwd_i ; bwd_i]. The global sentence feature g defaults to
the last position's full state (g_mode="last"); g_mode="fwd_last_bwd_first"
takes the forward state at the last position and the backward state at the
first instead.
"""
from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .numerics import sigmoid, tanh

GATE_NAMES = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")
G_MODES = ("last", "fwd_last_bwd_first")


def init_gru_gates(d_in: int, d_h: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """LeCun-uniform weights, zero biases."""
    gates = {}
    for g in ("z", "r", "h"):
        gates[f"W_{g}"] = rng.uniform(-1, 1, (d_h, d_in)) * np.sqrt(3.0 / d_in)
        gates[f"U_{g}"] = rng.uniform(-1, 1, (d_h, d_h)) * np.sqrt(3.0 / d_h)
        gates[f"b_{g}"] = np.zeros(d_h)
    return gates


def gru_step(x, h_prev, gates):
    """One recurrence step; returns (h, cache) with cache for the backward pass."""
    if x.shape[0] != gates["W_z"].shape[1] or h_prev.shape[0] != gates["U_z"].shape[1]:
        raise ShapeError(
            f"gru_step shapes do not conform: x {x.shape}, h_prev {h_prev.shape}, "
            f"W_z {gates['W_z'].shape}, U_z {gates['U_z'].shape}"
        )
    z = sigmoid(gates["W_z"] @ x + gates["U_z"] @ h_prev + gates["b_z"])
    r = sigmoid(gates["W_r"] @ x + gates["U_r"] @ h_prev + gates["b_r"])
    c = tanh(gates["W_h"] @ x + gates["U_h"] @ (r * h_prev) + gates["b_h"])
    h = (1.0 - z) * h_prev + z * c
    return h, (x, h_prev, z, r, c)


def gru_step_backward(dh, cache, gates, grads):
    """Backprop one step; accumulates gate gradients, returns (dx, dh_prev)."""
    x, h_prev, z, r, c = cache

    dc = dh * z
    dz = dh * (c - h_prev)
    dh_prev = dh * (1.0 - z)

    da_c = dc * (1.0 - c * c)
    grads["W_h"] += np.outer(da_c, x)
    grads["U_h"] += np.outer(da_c, r * h_prev)
    grads["b_h"] += da_c
    dx = gates["W_h"].T @ da_c
    drh = gates["U_h"].T @ da_c
    dr = drh * h_prev
    dh_prev = dh_prev + drh * r

    da_z = dz * z * (1.0 - z)
    grads["W_z"] += np.outer(da_z, x)
    grads["U_z"] += np.outer(da_z, h_prev)
    grads["b_z"] += da_z
    dx += gates["W_z"].T @ da_z
    dh_prev = dh_prev + gates["U_z"].T @ da_z

    da_r = dr * r * (1.0 - r)
    grads["W_r"] += np.outer(da_r, x)
    grads["U_r"] += np.outer(da_r, h_prev)
    grads["b_r"] += da_r
    dx += gates["W_r"].T @ da_r
    dh_prev = dh_prev + gates["U_r"].T @ da_r

    return dx, dh_prev


def _run_direction(X, gates, reverse):
    n = X.shape[0]
    d_h = gates["b_z"].shape[0]
    H = np.empty((n, d_h), dtype=X.dtype)
    caches = [None] * n
    h = np.zeros(d_h, dtype=X.dtype)
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        h, caches[t] = gru_step(X[t], h, gates)
        H[t] = h
    return H, caches


def _run_direction_backward(dH, caches, gates, grads, reverse):
    n = dH.shape[0]
    dX = np.zeros((n, gates["W_z"].shape[1]))
    carry = np.zeros(gates["b_z"].shape[0])
    order = range(n) if reverse else range(n - 1, -1, -1)
    for t in order:
        dX[t], carry = gru_step_backward(dH[t] + carry, caches[t], gates, grads)
    return dX


def encode_chars(X, fwd_gates, bwd_gates):
    """Run both directions over row vectors X (n, d_c).

    Returns (H, cache) with H of shape (n, 2*d_h); row i is [fwd_i ; bwd_i].
    """
    Hf, cf = _run_direction(X, fwd_gates, reverse=False)
    Hb, cb = _run_direction(X, bwd_gates, reverse=True)
    return np.hstack([Hf, Hb]), (cf, cb)


def encode_backward(dH, cache, fwd_gates, bwd_gates, fwd_grads, bwd_grads):
    """Backprop through both directions; returns dX of shape (n, d_c)."""
    cf, cb = cache
    d_h = fwd_gates["b_z"].shape[0]
    dX = _run_direction_backward(dH[:, :d_h], cf, fwd_gates, fwd_grads, reverse=False)
    dX += _run_direction_backward(dH[:, d_h:], cb, bwd_gates, bwd_grads, reverse=True)
    return dX


def global_feature(H, d_h, mode="last"):
    """Sentence-level context vector g read off the encoder states."""
    if mode == "last":
        return H[-1]
    if mode == "fwd_last_bwd_first":
        return np.concatenate([H[-1, :d_h], H[0, d_h:]])
    raise ValueError(f"g_mode {mode!r} not in {G_MODES}")


def global_feature_backward(dg, dH, d_h, mode="last"):
    """Accumulate d loss / d g into the encoder-state gradient dH."""
    if mode == "last":
        dH[-1] += dg
    elif mode == "fwd_last_bwd_first":
        dH[-1, :d_h] += dg[:d_h]
        dH[0, d_h:] += dg[d_h:]
    else:
        raise ValueError(f"g_mode {mode!r} not in {G_MODES}")
