"""Label vocabulary and binary vertex-feature encoding of enriched CFGs."""
from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Sequence

import numpy as np

from gounsafe.cfg.graph import CONTEXT_TYPES, EDGE_KINDS, VARIABLE, EnrichedCfg, label_category
from gounsafe.errors import UnknownFiniteLabel

DEFAULT_K = 127
INFINITE_CATEGORIES = ("type", "func", "pkg", "var")
OTHER = "<other>"


def load_manifest(path: str | None = None) -> dict[str, Any]:
    """The shipped list of finite-category labels, or one read from ``path``."""
    if path is None:
        text = resources.files("gounsafe").joinpath("data/finite_labels.json").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return json.loads(text)


def manifest_hash(manifest: dict[str, Any]) -> str:
    canon = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass
class LabelVocabulary:
    finite: dict[str, list[str]]
    infinite: dict[str, list[str]]  # selected labels, at most k per category
    k: int
    manifest_hash: str = ""
    labels: list[str] = field(default_factory=list)  # index -> label
    index: dict[str, int] = field(default_factory=dict)
    categories: list[str] = field(default_factory=list)  # index -> category

    def __post_init__(self) -> None:
        if not self.labels:
            self._layout()

    def _layout(self) -> None:
        labels: list[str] = []
        cats: list[str] = []
        for cat, labs in self.finite.items():
            labels.extend(f"{cat}:{lab}" for lab in labs)
            cats.extend([cat] * len(labs))
        for cat in INFINITE_CATEGORIES:
            sel = self.infinite.get(cat, [])
            # unused slots are reserved so the dimension never depends on the corpus
            pads = [f"{cat}:<unused-{i}>" for i in range(self.k - len(sel))]
            labels.extend([f"{cat}:{lab}" for lab in sel] + pads + [f"{cat}:{OTHER}"])
            cats.extend([cat] * (self.k + 1))
        self.labels = labels
        self.categories = cats
        self.index = {lab: i for i, lab in enumerate(labels)}

    @property
    def n_finite(self) -> int:
        return sum(len(v) for v in self.finite.values())

    @property
    def n(self) -> int:
        return len(INFINITE_CATEGORIES) * (self.k + 1) + self.n_finite

    def other_index(self, category: str) -> int:
        return self.index[f"{category}:{OTHER}"]

    def lookup(self, label: str) -> int:
        i = self.index.get(label)
        if i is not None:
            return i
        cat = label_category(label)
        if cat in INFINITE_CATEGORIES:
            return self.other_index(cat)
        raise UnknownFiniteLabel(f"label {label!r} is not in the finite-label manifest")

    def category_columns(self, cats: set[str] | frozenset[str]) -> np.ndarray:
        return np.array([c in cats for c in self.categories], dtype=bool)

    def to_json(self) -> dict[str, Any]:
        return {"k": self.k, "finite": self.finite, "infinite": self.infinite,
                "manifest_hash": self.manifest_hash}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> LabelVocabulary:
        return cls(d["finite"], d["infinite"], d["k"], d.get("manifest_hash", ""))

    @property
    def hash(self) -> str:
        canon = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def top_k(counts: Counter, k: int) -> list[str]:
    """Most frequent first, ties broken lexicographically."""
    return [lab for lab, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]]


def build_vocabulary(training_graphs: Sequence[EnrichedCfg], k: int = DEFAULT_K,
                     manifest: dict[str, Any] | None = None) -> LabelVocabulary:
    """Freeze the per-category top-``k`` labels of the training graphs."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if not training_graphs:
        raise ValueError("vocabulary needs at least one training graph")
    manifest = manifest or load_manifest()
    counts: dict[str, Counter] = {c: Counter() for c in INFINITE_CATEGORIES}
    for g in training_graphs:
        for v in g.vertices:
            for lab in v.labels:
                cat, _, val = lab.partition(":")
                if cat in counts:
                    counts[cat][val] += 1
    infinite = {c: top_k(counts[c], k) for c in INFINITE_CATEGORIES}
    finite = {c: list(v) for c, v in manifest["categories"].items()}
    return LabelVocabulary(finite, infinite, k, manifest_hash(manifest))


@dataclass(frozen=True)
class FeatureSubset:
    name: str
    categories: frozenset[str]
    keep_variables: bool


_BASE = frozenset({"stmt", "selfref"})
ALL = FeatureSubset("ALL", frozenset({"stmt", "selfref", "op", "vartype", "builtin",
                                      *INFINITE_CATEGORIES}), True)
NONE = FeatureSubset("NONE", _BASE, False)
ONLY_VARS = FeatureSubset("ONLY_VARS", _BASE | {"var"}, True)
ONLY_TYPES = FeatureSubset("ONLY_TYPES", _BASE | {"type"}, False)
ONLY_FUNCS = FeatureSubset("ONLY_FUNCS", _BASE | {"func", "builtin", "op"}, False)
ONLY_PKGS = FeatureSubset("ONLY_PKGS", _BASE | {"pkg"}, False)


def feature_subsets() -> list[FeatureSubset]:
    """The six ablation subsets, richest first."""
    return [ALL, NONE, ONLY_VARS, ONLY_TYPES, ONLY_FUNCS, ONLY_PKGS]


def subset_by_name(name: str) -> FeatureSubset:
    for s in feature_subsets():
        if s.name.lower() == name.lower().replace("-", "_"):
            return s
    raise ValueError(f"unknown feature subset {name!r}")


@dataclass
class EncodedInstance:
    features: np.ndarray  # (vertices, n) uint8
    edges: dict[str, np.ndarray]  # kind -> (m, 2) int64 of (src, dst)
    usage_vertex: int
    context_onehot: np.ndarray  # (3,)
    gold_what: int | None = None
    gold_why: int | None = None
    instance_id: str = ""

    @property
    def num_vertices(self) -> int:
        return self.features.shape[0]

    def to_json(self) -> dict[str, Any]:
        rows = [np.flatnonzero(r).tolist() for r in self.features]
        return {
            "id": self.instance_id, "n": int(self.features.shape[1]), "rows": rows,
            "edges": {k: v.tolist() for k, v in self.edges.items()},
            "usage_vertex": self.usage_vertex,
            "context": int(np.argmax(self.context_onehot)),
            "what": self.gold_what, "why": self.gold_why,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> EncodedInstance:
        x = np.zeros((len(d["rows"]), d["n"]), dtype=np.uint8)
        for i, cols in enumerate(d["rows"]):
            x[i, cols] = 1
        ctx = np.zeros(len(CONTEXT_TYPES))
        ctx[d["context"]] = 1.0
        edges = {k: np.array(v, dtype=np.int64).reshape(-1, 2) for k, v in d["edges"].items()}
        return cls(x, edges, d["usage_vertex"], ctx, d["what"], d["why"], d["id"])


def encode_graph(cfg: EnrichedCfg, vocab: LabelVocabulary, feature_mask: FeatureSubset = ALL,
                 usage_vertex: int | None = None) -> EncodedInstance:
    """Binary feature matrix and per-kind edge lists for one usage.

    Masked categories are zeroed (the dimension stays ``vocab.n``); subsets
    without variables drop variable vertices and their edges.
    """
    if usage_vertex is None:
        usage_vertex = min(cfg.usage_vertices.values()) if cfg.usage_vertices else \
            cfg.meta.get("usages", [{"vertex": 0}])[0]["vertex"]
    keep = [v.id for v in cfg.vertices if feature_mask.keep_variables or v.kind != VARIABLE]
    remap = {old: new for new, old in enumerate(keep)}
    x = np.zeros((len(keep), vocab.n), dtype=np.uint8)
    for old in keep:
        for lab in cfg.vertices[old].labels:
            x[remap[old], vocab.lookup(lab)] = 1
    x[:, ~vocab.category_columns(feature_mask.categories)] = 0
    edges: dict[str, np.ndarray] = {}
    for kind in EDGE_KINDS:
        pairs = [(remap[e.src], remap[e.dst]) for e in cfg.edges
                 if e.kind == kind and e.src in remap and e.dst in remap]
        edges[kind] = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    ctx = np.zeros(len(CONTEXT_TYPES))
    ctx[CONTEXT_TYPES.index(cfg.context_type)] = 1.0
    return EncodedInstance(x, edges, remap[usage_vertex], ctx)
