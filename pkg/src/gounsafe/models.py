"""Graph classifiers: MLP baseline, DeepSets, GIN and a local 2-WL network.

All graph variants share one head: pooled graph embedding, the usage vertex's
embedding and the context one-hot are concatenated and fed through an MLP into
two linear heads (WHAT and WHY).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from gounsafe.autodiff import ops
from gounsafe.autodiff.core import Tensor
from gounsafe.autodiff.ops import BatchNormState
from gounsafe.cfg.graph import CONTEXT_TYPES, EDGE_KINDS
from gounsafe.errors import BudgetExceeded, EmptyGraph, ShapeMismatch, VocabularyMismatch
from gounsafe.features import EncodedInstance

VARIANTS = ("mlp", "deepsets", "gin", "wl2")
ACTIVATIONS = ("relu", "sigmoid", "tanh", "elu")
POOLINGS = ("sum", "mean", "max", "min", "softmax")
WIDTHS = tuple(range(32, 513, 32))


@dataclass
class ModelConfig:
    variant: str = "gin"
    n_features: int = 594
    n_what: int = 11
    n_why: int = 11
    conv_depth: int = 2
    mlp_depth: int = 1
    conv_width: int = 64
    mlp_width: int = 64
    conv_activation: str = "relu"
    mlp_activation: str = "relu"
    pooling: str = "sum"
    batch_norm: bool = False
    dropout: float = 0.0
    wl2_radius: int = 1
    pair_cap: int = 250_000

    def validate(self) -> ModelConfig:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not 2 <= self.conv_depth <= 6:
            raise ValueError("conv_depth must lie in [2, 6]")
        if not 1 <= self.mlp_depth <= 3:
            raise ValueError("mlp_depth must lie in [1, 3]")
        for w in (self.conv_width, self.mlp_width):
            if w < 1:
                raise ValueError("layer widths must be positive")
        for a in (self.conv_activation, self.mlp_activation):
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        if self.pooling not in POOLINGS:
            raise ValueError(f"unknown pooling {self.pooling!r}")
        if self.pooling == "softmax" and self.conv_width < 2:
            raise ValueError("softmax pooling needs at least two embedding columns")
        if self.dropout not in (0.0, 0.5):
            raise ValueError("dropout must be 0 or 0.5")
        return self

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> ModelConfig:
        return cls(**d)

    @property
    def hash(self) -> str:
        canon = json.dumps(self.to_json(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass
class ModelParams:
    weights: dict[str, Tensor]
    bn: dict[str, BatchNormState] = field(default_factory=dict)
    temperature: tuple[float, float] = (1.0, 1.0)

    def tensors(self) -> list[Tensor]:
        return [self.weights[k] for k in sorted(self.weights)]

    def names(self) -> list[str]:
        return sorted(self.weights)

    def copy(self) -> ModelParams:
        w = {k: Tensor(v.data.copy(), requires_grad=True) for k, v in self.weights.items()}
        bn = {}
        for k, s in self.bn.items():
            c = BatchNormState(len(s.mean), s.momentum)
            c.mean, c.var = s.mean.copy(), s.var.copy()
            bn[k] = c
        return ModelParams(w, bn, self.temperature)


# -- initialization ----------------------------------------------------------------

def _dense(w: dict, rng: np.random.Generator, name: str, fan_in: int, fan_out: int,
           bias: bool = True) -> None:
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    w[f"{name}.W"] = Tensor(rng.uniform(-lim, lim, (fan_in, fan_out)), requires_grad=True)
    if bias:
        b = 1.0 / np.sqrt(fan_in)
        w[f"{name}.b"] = Tensor(rng.uniform(-b, b, fan_out), requires_grad=True)


def _bn(w: dict, bn: dict, name: str, width: int) -> None:
    w[f"{name}.gamma"] = Tensor(np.ones(width), requires_grad=True)
    w[f"{name}.beta"] = Tensor(np.zeros(width), requires_grad=True)
    bn[name] = BatchNormState(width)


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    """Glorot-uniform weights with fan-in scaled uniform biases."""
    cfg = config.validate()
    rng = np.random.default_rng(seed)
    w: dict[str, Tensor] = {}
    bn: dict[str, BatchNormState] = {}
    d, n = cfg.conv_width, cfg.n_features
    if cfg.variant == "mlp":
        head_in = n
    else:
        if cfg.variant == "wl2":
            _dense(w, rng, "pair.src", n, d, bias=True)
            _dense(w, rng, "pair.dst", n, d, bias=False)
            _dense(w, rng, "pair.edge", len(EDGE_KINDS), d, bias=False)
        for layer in range(cfg.conv_depth):
            fan = n if (layer == 0 and cfg.variant != "wl2") else d
            if cfg.variant == "wl2":
                _dense(w, rng, f"conv{layer}.phi_a", d, d, bias=True)
                _dense(w, rng, f"conv{layer}.phi_b", d, d, bias=False)
                _dense(w, rng, f"conv{layer}.self", d, d, bias=not cfg.batch_norm)
                _dense(w, rng, f"conv{layer}.agg", d, d, bias=False)
            else:
                # a bias ahead of batch norm is cancelled by the centering
                _dense(w, rng, f"conv{layer}", fan, d, bias=not cfg.batch_norm)
                if cfg.variant == "gin":
                    w[f"conv{layer}.eps"] = Tensor(np.zeros(1), requires_grad=True)
            if cfg.batch_norm:
                _bn(w, bn, f"conv{layer}.bn", d)
        pooled = d - 1 if cfg.pooling == "softmax" else d
        head_in = pooled + d + len(CONTEXT_TYPES)
    fan = head_in
    for layer in range(cfg.mlp_depth):
        _dense(w, rng, f"mlp{layer}", fan, cfg.mlp_width)
        fan = cfg.mlp_width
    _dense(w, rng, "head.what", fan, cfg.n_what)
    _dense(w, rng, "head.why", fan, cfg.n_why)
    return ModelParams(w, bn)


# -- batching ------------------------------------------------------------------------

@dataclass
class GraphBatch:
    """Disjoint union of encoded graphs."""
    x: np.ndarray  # (N, n)
    graph_id: np.ndarray  # (N,)
    usage: np.ndarray  # (B,) global row of each usage vertex
    ctx: np.ndarray  # (B, 3)
    edges: dict[str, np.ndarray]  # kind -> (m, 2) global ids
    num_graphs: int
    what: np.ndarray | None = None
    why: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_instances(cls, instances: Sequence[EncodedInstance]) -> GraphBatch:
        if not instances:
            raise EmptyGraph("empty batch")
        xs, gid, usage, ctx = [], [], [], []
        edges: dict[str, list[np.ndarray]] = {k: [] for k in EDGE_KINDS}
        off = 0
        for g, inst in enumerate(instances):
            nv = inst.num_vertices
            if nv == 0:
                raise EmptyGraph(f"instance {inst.instance_id!r} has no vertices")
            xs.append(inst.features)
            gid.append(np.full(nv, g, dtype=np.int64))
            usage.append(off + inst.usage_vertex)
            ctx.append(inst.context_onehot)
            for k in EDGE_KINDS:
                e = inst.edges.get(k)
                if e is not None and len(e):
                    edges[k].append(e + off)
            off += nv
        what = [i.gold_what for i in instances]
        why = [i.gold_why for i in instances]
        has_gold = all(v is not None for v in what + why)
        return cls(
            np.vstack(xs).astype(np.float64), np.concatenate(gid), np.array(usage, dtype=np.int64),
            np.vstack(ctx).astype(np.float64),
            {k: (np.vstack(v) if v else np.zeros((0, 2), dtype=np.int64)) for k, v in edges.items()},
            len(instances),
            np.array(what, dtype=np.int64) if has_gold else None,
            np.array(why, dtype=np.int64) if has_gold else None,
        )

    @property
    def num_vertices(self) -> int:
        return self.x.shape[0]

    def undirected(self) -> tuple[np.ndarray, np.ndarray]:
        """Deduplicated neighbor pairs over all edge kinds, both directions, no self loops."""
        if "und" not in self._cache:
            all_e = np.vstack([e for e in self.edges.values() if len(e)] or [np.zeros((0, 2), np.int64)])
            pairs = set()
            for a, b in all_e.tolist():
                if a != b:
                    pairs.add((a, b))
                    pairs.add((b, a))
            arr = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
            self._cache["und"] = (arr[:, 0], arr[:, 1])
        return self._cache["und"]

    def pairs(self, radius: int, cap: int) -> dict[str, np.ndarray]:
        key = ("pairs", radius)
        if key not in self._cache:
            self._cache[key] = _build_pairs(self, radius, cap)
        return self._cache[key]


def _build_pairs(batch: GraphBatch, radius: int, cap: int) -> dict[str, np.ndarray]:
    n = batch.num_vertices
    nbrs: list[set[int]] = [set() for _ in range(n)]
    src, dst = batch.undirected()
    for a, b in zip(src.tolist(), dst.tolist()):
        nbrs[a].add(b)
    reach: list[set[int]] = []
    for i in range(n):
        seen, frontier = {i}, {i}
        for _ in range(radius):
            frontier = {j for f in frontier for j in nbrs[f]} - seen
            seen |= frontier
        reach.append(seen)
    total = sum(len(r) for r in reach)
    if total > cap:
        raise BudgetExceeded(f"{total} vertex pairs exceed the cap of {cap}")
    pi, pj = [], []
    index: dict[tuple[int, int], int] = {}
    for i in range(n):
        for j in sorted(reach[i]):
            index[(i, j)] = len(pi)
            pi.append(i)
            pj.append(j)
    t_ik, t_kj, t_ij = [], [], []
    for (i, j), p in index.items():
        for k in sorted(reach[i] & reach[j]):
            a, b = index.get((i, k)), index.get((k, j))
            if a is not None and b is not None:
                t_ik.append(a)
                t_kj.append(b)
                t_ij.append(p)
    onehot = np.zeros((len(pi), len(EDGE_KINDS)))
    for c, kind in enumerate(EDGE_KINDS):
        for a, b in batch.edges[kind].tolist():
            p = index.get((a, b))
            if p is not None:
                onehot[p, c] = 1.0
    return {
        "i": np.array(pi, dtype=np.int64), "j": np.array(pj, dtype=np.int64),
        "ik": np.array(t_ik, dtype=np.int64), "kj": np.array(t_kj, dtype=np.int64),
        "ij": np.array(t_ij, dtype=np.int64), "edge": onehot,
    }


# -- layers ----------------------------------------------------------------------------

def _linear(w: dict, name: str, x) -> Tensor:
    y = ops.matmul(x, w[f"{name}.W"])
    b = w.get(f"{name}.b")
    return ops.add(y, b) if b is not None else y


def _post_conv(h: Tensor, params: ModelParams, cfg: ModelConfig, layer: int, training: bool) -> Tensor:
    name = f"conv{layer}.bn"
    if cfg.batch_norm:
        w = params.weights
        h = ops.batch_norm(h, w[f"{name}.gamma"], w[f"{name}.beta"], params.bn[name], training)
    return ops.activation(h, cfg.conv_activation)


def deepsets_convolve(x, params: ModelParams, cfg: ModelConfig, training: bool = False) -> Tensor:
    """Shared per-vertex transformation; structure is ignored."""
    h = x
    for layer in range(cfg.conv_depth):
        h = _post_conv(_linear(params.weights, f"conv{layer}", h), params, cfg, layer, training)
    return h


def gin_convolve(x, batch: GraphBatch, params: ModelParams, cfg: ModelConfig,
                 training: bool = False) -> Tensor:
    """(1 + eps) x_i + sum of neighbors, over all edge kinds as one undirected relation."""
    src, dst = batch.undirected()
    n = batch.num_vertices
    h = x
    for layer in range(cfg.conv_depth):
        eps = params.weights[f"conv{layer}.eps"]
        agg = ops.mul(h, ops.add(eps, 1.0))
        if len(src):
            agg = ops.add(agg, ops.segment_sum(ops.gather_rows(h, src), dst, n))
        h = _post_conv(_linear(params.weights, f"conv{layer}", agg), params, cfg, layer, training)
    return h


def wl2_convolve(x, batch: GraphBatch, params: ModelParams, cfg: ModelConfig,
                 training: bool = False) -> Tensor:
    """Local pair refinement: h'(i,j) from h(i,j) and sum_k phi(h(i,k), h(k,j))."""
    w = params.weights
    pr = batch.pairs(cfg.wl2_radius, cfg.pair_cap)
    xi = ops.gather_rows(x, pr["i"])
    xj = ops.gather_rows(x, pr["j"])
    # one linear map of x_i ⊕ x_j ⊕ edge-kinds(i→j), split into its three blocks
    h = ops.add(ops.add(_linear(w, "pair.src", xi), _linear(w, "pair.dst", xj)),
                _linear(w, "pair.edge", pr["edge"]))
    h = ops.activation(h, cfg.conv_activation)
    npairs = len(pr["i"])
    for layer in range(cfg.conv_depth):
        phi = ops.add(_linear(w, f"conv{layer}.phi_a", ops.gather_rows(h, pr["ik"])),
                      _linear(w, f"conv{layer}.phi_b", ops.gather_rows(h, pr["kj"])))
        phi = ops.activation(phi, cfg.conv_activation)
        agg = ops.segment_sum(phi, pr["ij"], npairs)
        h = ops.add(_linear(w, f"conv{layer}.self", h), _linear(w, f"conv{layer}.agg", agg))
        h = _post_conv(h, params, cfg, layer, training)
    return ops.segment_sum(h, pr["i"], batch.num_vertices)


def pool(z, graph_id, num_graphs: int, method: str) -> Tensor:
    """Per-graph readout; softmax pooling weighs the other columns by the last one."""
    z = ops.as_tensor(z)
    if z.shape[0] == 0:
        raise EmptyGraph("cannot pool an empty graph")
    gid = np.asarray(graph_id, dtype=np.int64)
    if method == "sum":
        return ops.segment_sum(z, gid, num_graphs)
    if method == "mean":
        return ops.segment_mean(z, gid, num_graphs)
    if method == "max":
        return ops.segment_max(z, gid, num_graphs)
    if method == "min":
        return ops.segment_min(z, gid, num_graphs)
    if method == "softmax":
        d = z.shape[1]
        if d < 2:
            raise ShapeMismatch("softmax pooling needs at least two columns")
        logits = ops.columns(z, d - 1, d)
        weights = ops.segment_softmax(ops.sum_(logits, axis=1), gid, num_graphs)
        weighted = ops.mul(ops.columns(z, 0, d - 1), ops.reshape(weights, (-1, 1)))
        return ops.segment_sum(weighted, gid, num_graphs)
    raise ValueError(f"unknown pooling {method!r}")


def embed(batch: GraphBatch, params: ModelParams, cfg: ModelConfig,
          training: bool = False) -> Tensor:
    """Vertex embeddings Z for the graph variants."""
    x = Tensor(batch.x)
    if cfg.variant == "deepsets":
        return deepsets_convolve(x, params, cfg, training)
    if cfg.variant == "gin":
        return gin_convolve(x, batch, params, cfg, training)
    if cfg.variant == "wl2":
        return wl2_convolve(x, batch, params, cfg, training)
    raise ValueError(f"variant {cfg.variant!r} has no graph convolution")


def graph_embeddings(batch: GraphBatch, params: ModelParams, cfg: ModelConfig) -> np.ndarray:
    z = embed(batch, params, cfg)
    return pool(z, batch.graph_id, batch.num_graphs, cfg.pooling).data


def classify_batch(batch: GraphBatch, params: ModelParams, cfg: ModelConfig,
                   training: bool = False, rng: np.random.Generator | None = None
                   ) -> tuple[Tensor, Tensor]:
    """Logits of both heads for every graph in the batch."""
    if batch.x.shape[1] != cfg.n_features:
        raise VocabularyMismatch(
            f"instances have {batch.x.shape[1]} features, model expects {cfg.n_features}")
    w = params.weights
    if cfg.variant == "mlp":
        h = Tensor(batch.x[batch.usage])
    else:
        z = embed(batch, params, cfg, training)
        pooled = pool(z, batch.graph_id, batch.num_graphs, cfg.pooling)
        h = ops.concat([pooled, ops.gather_rows(z, batch.usage), Tensor(batch.ctx)], axis=1)
    for layer in range(cfg.mlp_depth):
        h = ops.activation(_linear(w, f"mlp{layer}", h), cfg.mlp_activation)
        h = ops.dropout(h, cfg.dropout, rng, training)
    return _linear(w, "head.what", h), _linear(w, "head.why", h)


def classify(instance: EncodedInstance, params: ModelParams, cfg: ModelConfig
             ) -> tuple[np.ndarray, np.ndarray]:
    """Logits (WHAT, WHY) of a single instance in evaluation mode."""
    lw, ly = classify_batch(GraphBatch.from_instances([instance]), params, cfg)
    return lw.data[0], ly.data[0]


def layer_kinds(params: ModelParams) -> list[str]:
    """Parameter names grouped by layer, used to audit where BN and dropout sit."""
    return sorted({name.rsplit(".", 1)[0] for name in params.weights})
