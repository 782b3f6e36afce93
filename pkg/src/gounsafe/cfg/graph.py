"""Enriched control-flow graph: vertices, typed edges, validation and dumps."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

EDGE_KINDS = ("flow", "alt-flow", "decl", "use", "dir-use", "update", "assign", "call", "contains")
EDGE_RANK = {k: i for i, k in enumerate(EDGE_KINDS)}
FLOW_KINDS = frozenset({"flow", "alt-flow"})
ACCESS_KINDS = frozenset({"decl", "use", "dir-use", "update", "assign", "call"})
CONTEXT_TYPES = ("function", "global-variable", "type-definition")
STATEMENT, VARIABLE = "statement", "variable"


def label_category(label: str) -> str:
    return label.split(":", 1)[0]


@dataclass(eq=False)
class Vertex:
    id: int
    kind: str  # statement | variable
    labels: set[str] = field(default_factory=set)
    span: tuple[int, int, int, int] | None = None
    meta: dict[str, Any] = field(default_factory=dict, repr=False)

    def labels_in(self, category: str) -> list[str]:
        return sorted(lab for lab in self.labels if label_category(lab) == category)


@dataclass(frozen=True, order=True)
class Edge:
    src: int
    dst: int
    kind: str

    def sort_key(self) -> tuple[int, int, int]:
        return (self.src, self.dst, EDGE_RANK.get(self.kind, len(EDGE_KINDS)))


@dataclass(frozen=True)
class Violation:
    rule: str
    where: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.where}"


@dataclass(eq=False)
class EnrichedCfg:
    vertices: list[Vertex]
    edges: list[Edge]
    context_type: str
    usage_vertices: dict = field(default_factory=dict)  # UnsafeUsageSite -> vertex id
    name: str = ""
    meta: dict[str, Any] = field(default_factory=dict, repr=False)

    def statements(self) -> list[Vertex]:
        return [v for v in self.vertices if v.kind == STATEMENT]

    def variables(self) -> list[Vertex]:
        return [v for v in self.vertices if v.kind == VARIABLE]

    def edges_of(self, kind: str) -> list[Edge]:
        return [e for e in self.edges if e.kind == kind]

    def stmt_type(self, vid: int) -> str | None:
        labs = self.vertices[vid].labels_in("stmt")
        return labs[0].split(":", 1)[1] if labs else None

    def find_stmt(self, stmt_type: str) -> list[int]:
        return [v.id for v in self.vertices if f"stmt:{stmt_type}" in v.labels]

    def usage_records(self) -> list[dict[str, Any]]:
        out = []
        for site, vid in self.usage_vertices.items():
            out.append({"line": site.span[0], "col": site.span[1], "member": site.api_member,
                        "vertex": vid})
        out.sort(key=lambda r: (r["line"], r["col"], r["member"]))
        return out


def validate_cfg(cfg: EnrichedCfg) -> list[Violation]:
    """Check the structural invariants; an empty list means the graph is well formed."""
    out: list[Violation] = []
    n = len(cfg.vertices)
    for i, v in enumerate(cfg.vertices):
        if v.id != i:
            out.append(Violation("dense-ids", f"vertex at position {i} has id {v.id}"))
        if v.kind == STATEMENT:
            k = len(v.labels_in("stmt"))
            if k != 1:
                out.append(Violation("one-statement-type", f"vertex {i} has {k} statement-type labels"))
        elif v.kind == VARIABLE:
            k = len(v.labels_in("var"))
            if k != 1:
                out.append(Violation("one-variable-name", f"vertex {i} has {k} variable-name labels"))
        else:
            out.append(Violation("vertex-kind", f"vertex {i} has kind {v.kind!r}"))
    for e in cfg.edges:
        where = f"edge {e.src}->{e.dst} ({e.kind})"
        if e.kind not in EDGE_RANK:
            out.append(Violation("edge-kind", where))
            continue
        if not (0 <= e.src < n and 0 <= e.dst < n):
            out.append(Violation("edge-endpoint", where))
            continue
        sk, dk = cfg.vertices[e.src].kind, cfg.vertices[e.dst].kind
        if e.kind in FLOW_KINDS and (sk, dk) != (STATEMENT, STATEMENT):
            out.append(Violation("flow-statement-to-statement", where))
        elif e.kind in ACCESS_KINDS and (sk, dk) != (STATEMENT, VARIABLE):
            out.append(Violation("access-statement-to-variable", where))
        elif e.kind == "contains" and (sk, dk) != (VARIABLE, VARIABLE):
            out.append(Violation("contains-variable-to-variable", where))
    entries = cfg.find_stmt("entry")
    exits = cfg.find_stmt("exit")
    if cfg.context_type == "function":
        if len(entries) != 1:
            out.append(Violation("one-entry", f"{len(entries)} entry vertices"))
        if len(exits) != 1:
            out.append(Violation("one-exit", f"{len(exits)} exit vertices"))
        outgoing = {e.src for e in cfg.edges if e.kind in FLOW_KINDS}
        for v in cfg.statements():
            if v.id not in exits and v.id not in outgoing:
                out.append(Violation("statement-has-successor", f"vertex {v.id}"))
        for e in cfg.edges:
            if e.kind == "flow" and e.dst in entries:
                out.append(Violation("entry-no-incoming-flow", f"edge {e.src}->{e.dst}"))
    elif cfg.context_type in ("global-variable", "type-definition"):
        decls = cfg.find_stmt("declaration")
        if len(decls) != 1 or len(cfg.statements()) != 1:
            out.append(Violation("one-declaration", f"{len(cfg.statements())} statement vertices"))
    else:
        out.append(Violation("context-type", repr(cfg.context_type)))
    for site, vid in cfg.usage_vertices.items():
        if not (0 <= vid < n) or cfg.vertices[vid].kind != STATEMENT:
            out.append(Violation("usage-on-statement", f"site {site.span[:2]} -> {vid}"))
    return out


def cfg_records(cfg: EnrichedCfg) -> list[dict[str, Any]]:
    recs: list[dict[str, Any]] = [{"record": "graph", "context": cfg.context_type, "name": cfg.name}]
    for v in cfg.vertices:
        recs.append({
            "record": "vertex", "id": v.id, "kind": v.kind, "labels": sorted(v.labels),
            "span": list(v.span) if v.span else None,
        })
    for e in cfg.edges:
        recs.append({"record": "edge", "src": e.src, "dst": e.dst, "kind": e.kind})
    for u in cfg.usage_records():
        recs.append({"record": "usage", **u})
    return recs


def dump_cfg(cfg: EnrichedCfg) -> str:
    """Line-oriented JSON dump with sorted keys, stable across runs."""
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in cfg_records(cfg))


def load_cfg(text: str) -> EnrichedCfg:
    """Inverse of ``dump_cfg``; usage records are kept as plain dicts in ``meta``."""
    vertices: list[Vertex] = []
    edges: list[Edge] = []
    ctx, name, usages = "function", "", []
    for line in text.splitlines():
        if not line.strip():
            continue
        r = json.loads(line)
        kind = r["record"]
        if kind == "graph":
            ctx, name = r["context"], r["name"]
        elif kind == "vertex":
            vertices.append(Vertex(r["id"], r["kind"], set(r["labels"]),
                                   tuple(r["span"]) if r["span"] else None))
        elif kind == "edge":
            edges.append(Edge(r["src"], r["dst"], r["kind"]))
        elif kind == "usage":
            usages.append(r)
    cfg = EnrichedCfg(vertices, edges, ctx, name=name)
    cfg.meta["usages"] = usages
    return cfg
