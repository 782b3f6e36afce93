"""Differentiable primitives.  Each forward pass records its local gradient."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import sparse

from gounsafe.autodiff.core import Tensor, as_tensor, record
from gounsafe.errors import ShapeMismatch

BN_MOMENTUM = 0.9
BN_EPS = 1e-5


def scatter_add(idx: np.ndarray, values: np.ndarray, n: int) -> np.ndarray:
    """``out[idx[j]] += values[j]`` for rows, via a sparse indicator product."""
    if len(idx) == 0:
        return np.zeros((n,) + values.shape[1:])
    ind = sparse.csr_matrix((np.ones(len(idx)), (idx, np.arange(len(idx)))), shape=(n, len(idx)))
    flat = values.reshape(len(idx), -1)
    return np.asarray(ind @ flat).reshape((n,) + values.shape[1:])


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"cannot broadcast {a.shape} with {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    return record(a.data + b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    return record(a.data - b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    return record(a.data * b.data, (a, b),
                  lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul of {a.shape} and {b.shape}")
    return record(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def sum_(x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return record(x.data.sum(axis=axis, keepdims=keepdims), (x,), vjp)


def mean(x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else x.shape[axis]
    return mul(sum_(x, axis, keepdims), 1.0 / count)


def reshape(x, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    return record(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def gather_rows(x, idx) -> Tensor:
    """Rows ``x[idx]``; gradients scatter-add back."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    return record(x.data[idx], (x,), lambda g: (scatter_add(idx, g, x.shape[0]),))


def columns(x, start: int, stop: int) -> Tensor:
    x = as_tensor(x)

    def vjp(g):
        out = np.zeros_like(x.data)
        out[:, start:stop] = g
        return (out,)

    return record(x.data[:, start:stop], (x,), vjp)


def pick(x, idx) -> Tensor:
    """``x[i, idx[i]]`` for every row ``i``."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(x.shape[0])

    def vjp(g):
        out = np.zeros_like(x.data)
        out[rows, idx] = g
        return (out,)

    return record(x.data[rows, idx], (x,), vjp)


def segment_sum(x, segments, num_segments: int) -> Tensor:
    """Row sums grouped by ``segments``."""
    x = as_tensor(x)
    seg = np.asarray(segments, dtype=np.int64)
    if seg.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"{seg.shape[0]} segment ids for {x.shape[0]} rows")
    return record(scatter_add(seg, x.data, num_segments), (x,), lambda g: (g[seg],))


def segment_mean(x, segments, num_segments: int) -> Tensor:
    seg = np.asarray(segments, dtype=np.int64)
    counts = np.bincount(seg, minlength=num_segments).astype(np.float64)
    inv = 1.0 / np.maximum(counts, 1.0)
    x = as_tensor(x)
    return mul(segment_sum(x, seg, num_segments), inv.reshape((-1,) + (1,) * (x.data.ndim - 1)))


def _segment_extreme(x: Tensor, seg: np.ndarray, num_segments: int, ufunc, fill: float) -> Tensor:
    if seg.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"{seg.shape[0]} segment ids for {x.shape[0]} rows")
    out = np.full((num_segments,) + x.shape[1:], fill)
    ufunc.at(out, seg, x.data)
    empty = np.bincount(seg, minlength=num_segments) == 0
    out[empty] = 0.0
    hit = (x.data == out[seg]).astype(np.float64)
    ties = np.zeros_like(out)
    np.add.at(ties, seg, hit)
    share = hit / np.maximum(ties[seg], 1.0)

    def vjp(g):
        # ties split the gradient evenly
        return (share * g[seg],)

    return record(out, (x,), vjp)


def segment_max(x, segments, num_segments: int) -> Tensor:
    return _segment_extreme(as_tensor(x), np.asarray(segments, dtype=np.int64), num_segments,
                            np.maximum, -np.inf)


def segment_min(x, segments, num_segments: int) -> Tensor:
    return _segment_extreme(as_tensor(x), np.asarray(segments, dtype=np.int64), num_segments,
                            np.minimum, np.inf)


def segment_softmax(z, segments, num_segments: int) -> Tensor:
    """Softmax of a 1-d score vector within each segment."""
    z = as_tensor(z)
    seg = np.asarray(segments, dtype=np.int64)
    m = np.full(num_segments, -np.inf)
    np.maximum.at(m, seg, z.data)
    e = np.exp(z.data - m[seg])
    s = np.zeros(num_segments)
    np.add.at(s, seg, e)
    y = e / s[seg]

    def vjp(g):
        dot = np.zeros(num_segments)
        np.add.at(dot, seg, g * y)
        return (y * (g - dot[seg]),)

    return record(y, (z,), vjp)


def activation(x, name: str) -> Tensor:
    x = as_tensor(x)
    d = x.data
    if name == "relu":
        y = np.maximum(d, 0.0)
        dy = (d > 0).astype(np.float64)
    elif name == "sigmoid":
        y = 0.5 * (1.0 + np.tanh(0.5 * d))
        dy = y * (1.0 - y)
    elif name == "tanh":
        y = np.tanh(d)
        dy = 1.0 - y * y
    elif name == "elu":
        neg = np.expm1(np.minimum(d, 0.0))
        y = np.where(d > 0, d, neg)
        dy = np.where(d > 0, 1.0, neg + 1.0)
    elif name == "identity":
        return x
    else:
        raise ValueError(f"unknown activation {name!r}")
    return record(y, (x,), lambda g: (g * dy,))


def exp(x) -> Tensor:
    x = as_tensor(x)
    y = np.exp(x.data)
    return record(y, (x,), lambda g: (g * y,))


def log(x) -> Tensor:
    x = as_tensor(x)
    return record(np.log(x.data), (x,), lambda g: (g / x.data,))


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)
    return record(y, (x,), lambda g: (y * (g - (g * y).sum(axis=axis, keepdims=True)),))


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    y = z - lse
    p = np.exp(y)
    return record(y, (x,), lambda g: (g - p * g.sum(axis=axis, keepdims=True),))


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    nd = ts[0].data.ndim
    ax = axis % nd
    for t in ts[1:]:
        if t.data.ndim != nd or any(t.shape[i] != ts[0].shape[i] for i in range(nd) if i != ax):
            raise ShapeMismatch(f"concat of {ts[0].shape} and {t.shape} along axis {axis}")
    bounds = np.cumsum([0] + [t.shape[ax] for t in ts])

    def vjp(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(ts)))

    return record(np.concatenate([t.data for t in ts], axis=ax), ts, vjp)


class BatchNormState:
    """Running mean and variance used at inference time."""

    def __init__(self, width: int, momentum: float = BN_MOMENTUM):
        self.mean = np.zeros(width)
        self.var = np.ones(width)
        self.momentum = momentum


def batch_norm(x, gamma, beta, state: BatchNormState, training: bool) -> Tensor:
    """Normalize each column over rows, then scale and shift."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.data.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeMismatch(f"batch_norm of {x.shape} with scale {gamma.shape}")
    if not training:
        inv = 1.0 / np.sqrt(state.var + BN_EPS)
        xhat = (x.data - state.mean) * inv
        y = xhat * gamma.data + beta.data
        return record(y, (x, gamma, beta),
                      lambda g: (g * gamma.data * inv, (g * xhat).sum(0), g.sum(0)))
    n = x.shape[0]
    mu = x.data.mean(axis=0)
    var = x.data.var(axis=0)
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x.data - mu) * inv
    m = state.momentum
    state.mean = m * state.mean + (1 - m) * mu
    state.var = m * state.var + (1 - m) * var
    y = xhat * gamma.data + beta.data

    def vjp(g):
        dxhat = g * gamma.data
        dx = inv / n * (n * dxhat - dxhat.sum(0) - xhat * (dxhat * xhat).sum(0))
        return (dx, (g * xhat).sum(0), g.sum(0))

    return record(y, (x, gamma, beta), vjp)


def dropout(x, p: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; identity at evaluation time or when ``p`` is 0."""
    x = as_tensor(x)
    if not training or p <= 0.0:
        return x
    if rng is None:
        raise ValueError("dropout during training needs an explicit generator")
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return mul(x, keep)


def cross_entropy(logits, gold) -> Tensor:
    """Mean negative log-likelihood of integer targets."""
    lp = log_softmax(logits, axis=-1)
    return mul(sum_(pick(lp, gold)), -1.0 / len(np.atleast_1d(gold)))
