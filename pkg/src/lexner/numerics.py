"""Dense float ops with hand-derived backward passes.

Arrays are plain numpy ndarrays, float64 unless the caller opts into
float32 training. The model graph is static, so reverse-mode gradients
are written out per operation instead of going through a tape. Backward
functions take the upstream gradient plus whatever the forward pass
cached and return gradients in the same order as the forward inputs.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import NumericError, ShapeError


def check_finite(name: str, arr) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {name}")


def affine(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y = x W^T + b for x of shape (in,) or (rows, in), W of shape (out, in)."""
    if W.ndim != 2 or x.shape[-1] != W.shape[1] or b.shape != (W.shape[0],):
        raise ShapeError(f"affine shapes do not conform: x {x.shape}, W {W.shape}, b {b.shape}")
    return x @ W.T + b


def affine_backward(dy: np.ndarray, x: np.ndarray, W: np.ndarray):
    """Gradients (dx, dW, db) for affine."""
    if x.ndim == 1:
        return dy @ W, np.outer(dy, x), dy.copy()
    return dy @ W, dy.T @ x, dy.sum(axis=0)


def softmax(v: np.ndarray) -> np.ndarray:
    """Numerically stable softmax of a vector (max-subtracted)."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"softmax expects a non-empty vector, got shape {v.shape}")
    e = np.exp(v - v.max())
    return e / e.sum()


def softmax_backward(dp: np.ndarray, p: np.ndarray) -> np.ndarray:
    # dv_j = p_j * (dp_j - sum_k p_k dp_k)
    return p * (dp - np.dot(p, dp))


def sigmoid(x):
    return expit(x)


def sigmoid_backward(dy, y):
    return dy * y * (1.0 - y)


def tanh(x):
    return np.tanh(x)


def tanh_backward(dy, y):
    return dy * (1.0 - y * y)


def concat(parts) -> np.ndarray:
    return np.concatenate(parts)


def concat_backward(dy: np.ndarray, sizes) -> list[np.ndarray]:
    out = []
    at = 0
    for s in sizes:
        out.append(dy[at:at + s])
        at += s
    return out


def dropout(x: np.ndarray, p: float, train: bool, rng: np.random.Generator | None = None):
    """Inverted dropout: survivors are scaled by 1/(1-p); identity in eval mode.

    Returns (y, mask); backward is dy * mask.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return x, np.ones_like(x)
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    mask = ((rng.random(x.shape) >= p) / (1.0 - p)).astype(x.dtype)
    return x * mask, mask


def dropout_backward(dy: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dy * mask


def grad_check(f, store, eps: float = 1e-5, max_components: int | None = None,
               rng: np.random.Generator | None = None,
               denom_floor: float = 1e-5) -> float:
    """Compare the store's analytic gradients of f against central differences.

    `f()` must return a scalar computed from the store's current parameter
    values and leave d f / d theta accumulated in the store's gradient
    buffers. Components are sampled per parameter when `max_components`
    is set. Returns the max relative error, where the relative error of a
    pair (a, fd) is |a - fd| / max(|a|, |fd|, denom_floor) so that
    components at roundoff scale do not dominate.
    """
    store.zero_grads()
    loss = float(f())
    if not np.isfinite(loss):
        raise NumericError(f"grad_check: non-finite loss {loss}")
    analytic = {name: store[name].grad.copy() for name in store.names()}

    worst = 0.0
    for name in store.names():
        value = store[name].value
        flat = value.reshape(-1)
        idxs = np.arange(flat.size)
        if max_components is not None and flat.size > max_components:
            if rng is None:
                rng = np.random.default_rng(0)
            idxs = rng.choice(flat.size, size=max_components, replace=False)
        a_flat = analytic[name].reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            store.zero_grads()
            fp = float(f())
            flat[i] = orig - eps
            store.zero_grads()
            fm = float(f())
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericError(f"grad_check: non-finite loss while perturbing {name}")
            fd = (fp - fm) / (2.0 * eps)
            a = a_flat[i]
            rel = abs(a - fd) / max(abs(a), abs(fd), denom_floor)
            if rel > worst:
                worst = rel
    store.zero_grads()
    return worst
