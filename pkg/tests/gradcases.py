"""Scalar test functions over each primitive and each model variant, for gradient checks."""
from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from gounsafe import autodiff as ad
from gounsafe.autodiff import ops
from gounsafe.cfg import EDGE_KINDS
from gounsafe.features import EncodedInstance
from gounsafe.models import GraphBatch, ModelConfig, classify_batch, init_params
from gounsafe.training import joint_loss


def _t(rng, *shape, positive=False):
    x = rng.normal(size=shape)
    return ad.Tensor(np.abs(x) + 0.5 if positive else x, requires_grad=True)


def _weighted(y, rng):
    """Contract an output with fixed random weights so every entry matters."""
    w = rng.normal(size=y.shape)
    return ad.sum_(ad.mul(y, w))


def primitive_cases():
    """name -> builder(rng) returning (f, params)."""

    def binary(op):
        def build(rng):
            a, b = _t(rng, 3, 4), _t(rng, 1, 4)
            w = rng.normal(size=(3, 4))
            return (lambda: ad.sum_(ad.mul(op(a, b), w))), [a, b]
        return build

    def unary(op, positive=False):
        def build(rng):
            x = _t(rng, 4, 3, positive=positive)
            w = rng.normal(size=(4, 3))
            return (lambda: ad.sum_(ad.mul(op(x), w))), [x]
        return build

    def matmul(rng):
        a, b = _t(rng, 3, 5), _t(rng, 5, 2)
        w = rng.normal(size=(3, 2))
        return (lambda: ad.sum_(ad.mul(ad.matmul(a, b), w))), [a, b]

    def segment(op):
        def build(rng):
            x = _t(rng, 7, 3)
            seg = np.array([0, 0, 1, 2, 2, 2, 1])
            w = rng.normal(size=(3, 3))
            return (lambda: ad.sum_(ad.mul(op(x, seg, 3), w))), [x]
        return build

    def seg_softmax(rng):
        z = _t(rng, 7)
        seg = np.array([0, 0, 1, 2, 2, 2, 1])
        w = rng.normal(size=7)
        return (lambda: ad.sum_(ad.mul(ad.segment_softmax(z, seg, 3), w))), [z]

    def gather(rng):
        x = _t(rng, 4, 3)
        idx = np.array([0, 2, 2, 3, 0])
        w = rng.normal(size=(5, 3))
        return (lambda: ad.sum_(ad.mul(ad.gather_rows(x, idx), w))), [x]

    def concat(rng):
        a, b = _t(rng, 3, 2), _t(rng, 3, 4)
        w = rng.normal(size=(3, 6))
        return (lambda: ad.sum_(ad.mul(ad.concat([a, b]), w))), [a, b]

    def batch_norm(rng):
        x, g, b = _t(rng, 6, 3), _t(rng, 3), _t(rng, 3)
        w = rng.normal(size=(6, 3))
        return (lambda: ad.sum_(ad.mul(
            ad.batch_norm(x, g, b, ad.BatchNormState(3), training=True), w))), [x, g, b]

    def dropout(rng):
        x = _t(rng, 5, 4)
        w = rng.normal(size=(5, 4))
        seed = int(rng.integers(1 << 30))
        return (lambda: ad.sum_(ad.mul(
            ad.dropout(x, 0.5, np.random.default_rng(seed), training=True), w))), [x]

    def cross_entropy(rng):
        x = _t(rng, 4, 5)
        gold = rng.integers(0, 5, size=4)
        return (lambda: ad.cross_entropy(x, gold)), [x]

    def mean(rng):
        x = _t(rng, 4, 3)
        w = rng.normal(size=3)
        return (lambda: ad.sum_(ad.mul(ad.mean(x, axis=0), w))), [x]

    # relu and elu are checked away from their kink at 0
    def kinked(name):
        def build(rng):
            d = rng.normal(size=(4, 3))
            x = ad.Tensor(np.sign(d) * (np.abs(d) + 0.1), requires_grad=True)
            w = rng.normal(size=(4, 3))
            return (lambda: ad.sum_(ad.mul(ad.activation(x, name), w))), [x]
        return build

    return {
        "add": binary(ad.add),
        "sub": binary(ad.sub),
        "mul": binary(ad.mul),
        "matmul": matmul,
        "mean": mean,
        "segment_sum": segment(ad.segment_sum),
        "segment_mean": segment(ad.segment_mean),
        "segment_max": segment(ad.segment_max),
        "segment_min": segment(ad.segment_min),
        "segment_softmax": seg_softmax,
        "gather_rows": gather,
        "relu": kinked("relu"),
        "elu": kinked("elu"),
        "sigmoid": unary(lambda x: ad.activation(x, "sigmoid")),
        "tanh": unary(lambda x: ad.activation(x, "tanh")),
        "exp": unary(ad.exp),
        "log": unary(ad.log, positive=True),
        "softmax": unary(lambda x: ad.softmax(x, axis=1)),
        "log_softmax": unary(lambda x: ad.log_softmax(x, axis=1)),
        "concat": concat,
        "batch_norm": batch_norm,
        "dropout": dropout,
        "cross_entropy": cross_entropy,
    }


def random_instances(rng: np.random.Generator, count: int = 3, n_features: int = 10,
                     n_what: int = 11, n_why: int = 11) -> list[EncodedInstance]:
    """Small random graphs with real-valued features and random gold labels."""
    out = []
    for g in range(count):
        nv = int(rng.integers(3, 6))
        x = rng.normal(size=(nv, n_features))
        edges = {k: np.zeros((0, 2), dtype=np.int64) for k in EDGE_KINDS}
        edges["flow"] = np.array([(i, i + 1) for i in range(nv - 1)], dtype=np.int64)
        extra = rng.integers(0, nv, size=(2, 2))
        edges["dir-use"] = extra[extra[:, 0] != extra[:, 1]]
        ctx = np.eye(3)[g % 3]
        inst = EncodedInstance(x, edges, int(rng.integers(nv)), ctx, int(rng.integers(n_what)),
                               int(rng.integers(n_why)), f"g{g}")
        out.append(inst)
    return out


def model_case(variant: str, seed: int, n_features: int = 10, **overrides):
    """Joint loss of a small model over random graphs, with its parameter list."""
    rng = np.random.default_rng(seed)
    instances = random_instances(rng, n_features=n_features)
    opts = dict(conv_width=6, mlp_width=6, conv_depth=2, mlp_depth=1)
    opts.update(overrides)
    cfg = ModelConfig(variant, n_features=n_features, **opts)
    params = init_params(cfg, seed)
    batch = GraphBatch.from_instances(instances)

    def f():
        lw, ly = classify_batch(batch, params, cfg, training=True, rng=np.random.default_rng(seed))
        return joint_loss(lw, ly, batch.what, batch.why)

    return f, params.tensors()


@contextmanager
def relu_margin():
    """Collect the smallest |input| seen by every relu while active."""
    seen: list[float] = []
    original = ops.activation

    def watched(x, name):
        if name == "relu":
            seen.append(float(np.abs(ad.as_tensor(x).data).min(initial=np.inf)))
        return original(x, name)

    ops.activation = watched
    try:
        yield seen
    finally:
        ops.activation = original


def smooth_model_points(variant: str, count: int = 10, margin: float = 1e-3, **overrides):
    """The first ``count`` seeds whose relu inputs all stay ``margin`` away from the kink.

    Central differences across a kink measure a one-sided slope mix, not a gradient.
    """
    out, seed = [], 0
    while len(out) < count:
        f, params = model_case(variant, seed, **overrides)
        with relu_margin() as seen:
            f()
        if min(seen, default=np.inf) > margin:
            out.append((seed, f, params))
        seed += 1
    return out
