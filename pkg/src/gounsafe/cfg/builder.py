"""Build the enriched CFG of one usage context and attach vertex labels.

Statements become statement vertices joined by ``flow``/``alt-flow`` edges;
named memory locations (locals, parameters, globals, struct fields, function
pointers) become variable vertices reached through access edges.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from gounsafe.cfg.graph import (
    EDGE_RANK, STATEMENT, VARIABLE, Edge, EnrichedCfg, Vertex,
)
from gounsafe.errors import UnsupportedContext
from gounsafe.frontend.ast import TYPE_KINDS, AstNode, Span
from gounsafe.frontend.resolve import (
    BUILTIN_FUNCS, BUILTIN_TYPES, PREDECLARED_CONSTS, FileScope, field_type, file_scope,
    infer_type, local_env, local_type_names, make_type_name, references_type, type_labels,
)
from gounsafe.frontend.usages import ContextRef, UnsafeUsageSite

CONTEXT_TYPE = {
    "function-body": "function",
    "global-variable": "global-variable",
    "type-declaration": "type-definition",
}

SIMPLE_STMT_TYPES = {
    "assign": "assign", "short-var-decl": "define", "expr-stmt": "expr", "incdec": "incdec",
    "send": "send",
}
_LIT_TYPE = {"INT": "int", "FLOAT": "float64", "IMAG": "complex128", "CHAR": "rune", "STRING": "string"}


@dataclass
class _Loop:
    kind: str  # loop | switch | select
    label: str | None
    cont: int | None
    breaks: list[tuple[int, str]] = field(default_factory=list)


@dataclass
class _Var:
    key: str
    name: str
    type_node: AstNode | None = None
    package: str | None = None
    vartype: str | None = None
    own: bool = True  # defined in the package under analysis
    selfvar: bool = False


class _Builder:
    def __init__(self, context: ContextRef):
        self.ctx = context
        self.root = context.root
        self.scope: FileScope = file_scope(self.root)
        self.fn = context.node if context.kind == "function-body" else None
        self.locals = self.fn.meta.get("locals", frozenset()) if self.fn is not None else frozenset()
        self.env = local_env(self.fn, self.scope) if self.fn is not None else {}
        self.local_types = local_type_names(self.fn) if self.fn is not None else {}
        self.stmts: list[Vertex] = []
        self.flow: list[tuple[int, int, str]] = []
        self.loops: list[_Loop] = []
        self.labels: dict[str, int] = {}
        self.gotos: list[tuple[int, str]] = []
        self.exit_preds: list[tuple[int, str]] = []
        self.pending_label: str | None = None
        self.result_ids: list[int] = []

    # -- statement vertices ---------------------------------------------------
    def new_stmt(self, stmt_type: str, span: Span | None, parts: Sequence[AstNode] = (),
                 node: AstNode | None = None, **meta) -> int:
        v = Vertex(len(self.stmts), STATEMENT, {f"stmt:{stmt_type}"}, span)
        v.meta.update(parts=list(parts), node=node, order=len(self.stmts), **meta)
        self.stmts.append(v)
        return v.id

    def connect(self, preds: list[tuple[int, str]], dst: int) -> None:
        for src, kind in preds:
            self.flow.append((src, dst, kind))

    def seq(self, stmts: list[AstNode], preds: list[tuple[int, str]]) -> list[tuple[int, str]]:
        for s in stmts:
            preds = self.stmt(s, preds)
        return preds

    def stmt(self, s: AstNode, preds: list[tuple[int, str]]) -> list[tuple[int, str]]:
        k = s.kind
        label, self.pending_label = self.pending_label, None
        if s.attrs.get("opaque"):
            v = self.new_stmt("opaque", s.span, [], s)
            self.connect(preds, v)
            return [(v, "flow")]
        if k in SIMPLE_STMT_TYPES:
            v = self.new_stmt(SIMPLE_STMT_TYPES[k], s.span, [s], s)
            self.connect(preds, v)
            return [(v, "flow")]
        if k == "declaration":
            v = self.new_stmt("declare", s.span, [s], s)
            self.connect(preds, v)
            return [(v, "flow")]
        if k in ("go", "defer"):
            v = self.new_stmt(k, s.span, [s], s)
            self.connect(preds, v)
            return [(v, "flow")]
        if k == "return":
            v = self.new_stmt("return", s.span, [s], s)
            self.connect(preds, v)
            self.exit_preds.append((v, "flow"))
            return []
        if k == "block":
            return self.seq(s.all("stmt"), preds)
        if k == "labeled":
            v = self.new_stmt("label", (s.span[0], s.span[1], s.span[0], s.span[1] + len(s.value) + 1),
                              [], s)
            self.connect(preds, v)
            self.labels[s.value] = v
            inner = s.child("stmt")
            if inner is None:
                return [(v, "flow")]
            self.pending_label = s.value
            out = self.stmt(inner, [(v, "flow")])
            self.pending_label = None
            return out
        if k == "branch":
            return self.branch(s, preds)
        if k == "if":
            return self.if_stmt(s, preds)
        if k == "for":
            return self.for_stmt(s, preds, label)
        if k == "switch":
            return self.switch_stmt(s, preds, label)
        if k == "select":
            return self.select_stmt(s, preds, label)
        v = self.new_stmt("opaque", s.span, [], s)
        self.connect(preds, v)
        return [(v, "flow")]

    def branch(self, s: AstNode, preds):
        v = self.new_stmt("branch", s.span, [], s)
        self.connect(preds, v)
        word, lab = s.value, s.attrs.get("label")
        if word == "goto":
            self.gotos.append((v, lab))
            return []
        if word == "fallthrough":
            return [(v, "flow")]
        target = None
        for lp in reversed(self.loops):
            if lab is not None and lp.label != lab:
                continue
            if word == "continue" and lp.kind != "loop":
                continue
            target = lp
            break
        if target is None:
            # stray break/continue: control leaves the function
            self.exit_preds.append((v, "flow"))
        elif word == "break":
            target.breaks.append((v, "flow"))
        else:
            self.flow.append((v, target.cont, "flow"))
        return []

    @staticmethod
    def head_span(s: AstNode, body: AstNode | None) -> Span:
        if body is None:
            return s.span
        return (s.span[0], s.span[1], body.span[0], body.span[1])

    def if_stmt(self, s: AstNode, preds):
        init = s.child("init")
        if init is not None:
            iv = self.new_stmt(SIMPLE_STMT_TYPES.get(init.kind, "opaque"), init.span, [init], init)
            self.connect(preds, iv)
            preds = [(iv, "flow")]
        then = s.child("then")
        v = self.new_stmt("if", self.head_span(s, then), [s.child("cond")], s)
        self.connect(preds, v)
        out = self.seq(then.all("stmt"), [(v, "flow")])
        els = s.child("else")
        if els is None:
            return out + [(v, "alt-flow")]
        if els.kind == "if":
            return out + self.if_stmt(els, [(v, "alt-flow")])
        return out + self.seq(els.all("stmt"), [(v, "alt-flow")])

    def for_stmt(self, s: AstNode, preds, label):
        body = s.child("body")
        if s.attrs.get("range"):
            v = self.new_stmt("range", self.head_span(s, body),
                              s.all("key") + s.all("value") + [s.child("range")], s)
            self.connect(preds, v)
            lp = _Loop("loop", label, v)
            self.loops.append(lp)
            tail = self.seq(body.all("stmt"), [(v, "flow")])
            self.loops.pop()
            self.connect(tail, v)
            return [(v, "alt-flow")] + lp.breaks
        init, cond, post = s.child("init"), s.child("cond"), s.child("post")
        if init is not None:
            iv = self.new_stmt(SIMPLE_STMT_TYPES.get(init.kind, "opaque"), init.span, [init], init)
            self.connect(preds, iv)
            preds = [(iv, "flow")]
        span = cond.span if (cond is not None and s.attrs.get("clauses")) else self.head_span(s, body)
        v = self.new_stmt("for", span, [cond] if cond is not None else [], s)
        self.connect(preds, v)
        pv = None
        if post is not None:
            pv = self.new_stmt(SIMPLE_STMT_TYPES.get(post.kind, "opaque"), post.span, [post], post)
            self.flow.append((pv, v, "flow"))
        lp = _Loop("loop", label, pv if pv is not None else v)
        self.loops.append(lp)
        tail = self.seq(body.all("stmt"), [(v, "flow")])
        self.loops.pop()
        self.connect(tail, pv if pv is not None else v)
        out = list(lp.breaks)
        if cond is not None:
            out.insert(0, (v, "alt-flow"))
        return out

    def switch_stmt(self, s: AstNode, preds, label):
        init = s.child("init")
        if init is not None:
            iv = self.new_stmt(SIMPLE_STMT_TYPES.get(init.kind, "opaque"), init.span, [init], init)
            self.connect(preds, iv)
            preds = [(iv, "flow")]
        cases = s.all("case")
        end = cases[0].span if cases else None
        span = (s.span[0], s.span[1], end[0], end[1]) if end else s.span
        parts = [p for p in (s.child("bind"), s.child("tag")) if p is not None]
        v = self.new_stmt("type-switch" if s.attrs.get("type_switch") else "switch", span, parts, s)
        self.connect(preds, v)
        lp = _Loop("switch", label, None)
        self.loops.append(lp)
        out: list[tuple[int, str]] = [(v, "alt-flow")]
        carry: list[tuple[int, str]] = []
        for c in cases:
            cv = self.new_stmt("case", c.meta.get("head_span", c.span), c.all("expr"), c)
            self.flow.append((v, cv, "flow"))
            body = c.all("stmt")
            tail = self.seq(body, [(cv, "flow")] + carry)
            carry = []
            if body and body[-1].kind == "branch" and body[-1].value == "fallthrough":
                carry = tail
            else:
                out.extend(tail)
        out.extend(carry)
        self.loops.pop()
        return out + lp.breaks

    def select_stmt(self, s: AstNode, preds, label):
        cases = s.all("case")
        end = cases[0].span if cases else None
        span = (s.span[0], s.span[1], end[0], end[1]) if end else s.span
        v = self.new_stmt("select", span, [], s)
        self.connect(preds, v)
        lp = _Loop("select", label, None)
        self.loops.append(lp)
        out: list[tuple[int, str]] = []
        for c in cases:
            comm = c.child("comm")
            cv = self.new_stmt("case", c.meta.get("head_span", c.span),
                               [comm] if comm is not None else [], c)
            self.flow.append((v, cv, "flow"))
            out.extend(self.seq(c.all("stmt"), [(cv, "flow")]))
        self.loops.pop()
        if not cases:
            out.append((v, "flow"))
        return out + lp.breaks

    # -- whole graph -------------------------------------------------------------
    def build_function(self) -> tuple[list[Vertex], list[tuple[int, int, str]]]:
        fn = self.fn
        head = (fn.span[0], fn.span[1], fn.span[0], fn.span[1])
        entry = self.new_stmt("entry", head, [], fn)
        body = fn.child("body")
        tail = self.seq(body.all("stmt") if body is not None else [], [(entry, "flow")])
        self.exit_preds.extend(tail)
        for src, lab in self.gotos:
            if lab in self.labels:
                self.flow.append((src, self.labels[lab], "flow"))
            else:
                self.exit_preds.append((src, "flow"))
        end = (fn.span[2], fn.span[3])
        exit_ = self.new_stmt("exit", (end[0], end[1], end[0], end[1]), [], fn)
        self.connect(self.exit_preds, exit_)
        return self.stmts, self.flow


def _reorder(stmts: list[Vertex], flow: list[tuple[int, int, str]]):
    """Entry first, exit last, everything else by source position."""
    def key(v: Vertex):
        t = v.labels_in("stmt")[0]
        if t == "stmt:entry":
            return (0, (0, 0), 0)
        if t == "stmt:exit":
            return (2, (0, 0), 0)
        return (1, (v.span[0], v.span[1]) if v.span else (0, 0), v.meta["order"])

    order = sorted(stmts, key=key)
    remap = {v.id: i for i, v in enumerate(order)}
    for i, v in enumerate(order):
        v.id = i
    return order, [(remap[a], remap[b], k) for a, b, k in flow]


# -- memory accesses ---------------------------------------------------------------

class _Access:
    """Adds variable vertices and access edges, in first-reference order."""

    def __init__(self, b: _Builder, vertices: list[Vertex], edges: set[tuple[int, int, str]]):
        self.b = b
        self.vertices = vertices
        self.edges = edges
        self.vars: dict[str, int] = {}
        self.cur = 0

    def var(self, info: _Var) -> int:
        vid = self.vars.get(info.key)
        if vid is None:
            vid = len(self.vertices)
            v = Vertex(vid, VARIABLE, {f"var:{info.name}"}, None)
            v.meta["info"] = info
            self.vertices.append(v)
            self.vars[info.key] = vid
        return vid

    def edge(self, dst: int, kind: str, src: int | None = None) -> None:
        self.edges.add((self.cur if src is None else src, dst, kind))

    # which identifiers name variables
    def ident_var(self, name: str) -> _Var | None:
        b = self.b
        if name == "_" or name in PREDECLARED_CONSTS:
            return None
        if name in b.locals:
            return _Var(name, name, b.env.get(name), b.scope.package_path, own=True)
        if name in b.local_types or name in b.scope.types or name in BUILTIN_TYPES:
            return None
        if name in b.scope.funcs or name in b.scope.imports or name in BUILTIN_FUNCS:
            return None
        return _Var(name, name, b.scope.globals.get(name), b.scope.package_path, own=True)

    def chain(self, e: AstNode) -> list[int] | None:
        """Variable ids along a selector chain, or None if its base is not a variable."""
        base = e.child("base")
        fields = e.all("field")
        b = self.b
        if base.kind != "ident":
            return None
        if base.value in b.scope.imports and base.value not in b.locals:
            path = b.scope.imports[base.value]
            if path == "unsafe":
                return None
            first = fields[0].value
            info = _Var(f"{path}.{first}", first, None, path, own=False)
            ids = [self.var(info)]
            rest, key, t = fields[1:], info.key, None
        else:
            info = self.ident_var(base.value)
            if info is None:
                return None
            ids = [self.var(info)]
            rest, key, t = fields, info.key, info.type_node
            path = info.package
        for f in rest:
            key = f"{key}.{f.value}"
            t = field_type(t, f.value, b.scope) if t is not None else None
            ids.append(self.var(_Var(key, f.value, t, path, own=path == b.scope.package_path)))
        for a, c in zip(ids, ids[1:]):
            self.edge(c, "contains", src=a)
        return ids

    def read(self, e: AstNode | None) -> None:
        if e is None:
            return
        k = e.kind
        if k in TYPE_KINDS or k in ("literal", "ellipsis-len"):
            return
        if k == "ident":
            info = self.ident_var(e.value)
            if info is not None:
                self.edge(self.var(info), "dir-use")
            return
        if k == "selector-chain":
            ids = self.chain(e)
            if ids is None:
                self.read(e.child("base"))
                return
            for vid in ids[:-1]:
                self.edge(vid, "use")
            self.edge(ids[-1], "dir-use")
            return
        if k == "call":
            callee = e.child("callee")
            m = e.meta
            if m.get("callee_var") or (callee.kind == "ident" and m.get("unresolved")):
                info = self.ident_var(callee.value)
                if info is not None:
                    self.edge(self.var(info), "call")
            elif callee.kind == "ident" and callee.value in self.b.scope.globals:
                self.edge(self.var(self.ident_var(callee.value)), "call")
            elif callee.kind == "selector-chain" and m.get("method"):
                fields = callee.all("field")
                recv = callee.child("base")
                if len(fields) > 1:
                    trimmed = AstNode("selector-chain", span=callee.span)
                    trimmed.add(recv, "base")
                    for f in fields[:-1]:
                        trimmed.add(f, "field")
                    self.read(trimmed)
                else:
                    self.read(recv)
            elif callee.kind != "ident" and callee.kind != "selector-chain":
                self.read(callee)
            for a in e.all("arg"):
                self.read(a)
            return
        if k == "composite-literal":
            t = e.child("type")
            keyed_fields = t is None or t.kind != "map-type"
            for el in e.all("elem"):
                key = el.child("key")
                if key is not None and not (keyed_fields and key.kind == "ident"):
                    self.read(key)
                self.read(el.child("value"))
            return
        if k == "func-lit":
            for s in e.child("body").walk():
                if s is e.child("body"):
                    continue
                if s.kind in SIMPLE_STMT_TYPES or s.kind in ("return", "declaration", "go", "defer"):
                    self.stmt_access(s, nested=True)
                elif s.kind in ("if", "for", "switch"):
                    for role in ("cond", "tag", "range"):
                        self.read(s.child(role))
            return
        for c in e.children:
            if c.kind not in TYPE_KINDS:
                self.read(c)

    def write(self, e: AstNode, direct: bool = True, decl: bool = False) -> None:
        k = e.kind
        if k == "ident":
            info = self.ident_var(e.value)
            if info is not None:
                self.edge(self.var(info), "decl" if decl else ("assign" if direct else "update"))
            return
        if k == "selector-chain":
            ids = self.chain(e)
            if ids is None:
                self.read(e.child("base"))
                return
            for vid in ids[:-1]:
                self.edge(vid, "update")
            self.edge(ids[-1], "assign" if direct else "update")
            return
        if k == "index":
            self.write(e.child("base"), direct=False)
            self.read(e.child("index"))
            return
        if k == "unary-op" and e.value == "*":
            self.write(e.children[0], direct=False)
            return
        if k == "paren":
            self.write(e.children[0], direct, decl)
            return
        self.read(e)

    def stmt_access(self, s: AstNode, nested: bool = False) -> None:
        k = s.kind
        if k == "short-var-decl":
            for x in s.all("lhs"):
                self.write(x, decl=True)
            for x in s.all("rhs"):
                self.read(x)
        elif k == "assign":
            for x in s.all("lhs"):
                self.write(x)
            for x in s.all("rhs"):
                self.read(x)
        elif k == "incdec":
            self.write(s.child("target"))
        elif k == "send":
            self.read(s.child("chan"))
            self.read(s.child("value"))
        elif k == "expr-stmt":
            if not s.attrs.get("opaque"):
                self.read(s.child("expr"))
        elif k in ("go", "defer"):
            self.read(s.child("call"))
        elif k == "declaration":
            if s.attrs.get("keyword") in ("var", "const"):
                for n in s.all("name"):
                    self.write(n, decl=True)
                for v in s.all("value"):
                    self.read(v)
        elif k == "return":
            for v in s.all("value"):
                self.read(v)
            if not nested:
                for vid in self.b.result_ids:
                    self.edge(vid, "assign")


def _vertex_parts_access(acc: _Access, v: Vertex) -> None:
    node = v.meta.get("node")
    parts = v.meta.get("parts", [])
    t = v.labels_in("stmt")[0][5:]
    if t == "range":
        s = node
        lhs = s.all("key") + s.all("value")
        acc.read(s.child("range"))
        for x in lhs:
            acc.write(x, decl=bool(s.attrs.get("define")))
        return
    if t == "type-switch" and node.child("bind") is not None:
        acc.read(node.child("tag"))
        acc.write(node.child("bind"), decl=True)
        return
    if t == "case" and node.child("comm") is not None:
        acc.stmt_access(node.child("comm"))
        return
    if t in ("case", "if", "for", "switch", "type-switch"):
        for p in parts:
            if p is not None and p.kind not in TYPE_KINDS:
                acc.read(p)
        return
    for p in parts:
        acc.stmt_access(p)


def _params(fn: AstNode, scope: FileScope) -> list[_Var]:
    out = []
    for role, prefix in (("receiver", "~recv"), ("param", "~p"), ("result", "~r")):
        for i, f in enumerate(fn.all(role)):
            name = f.value or ("~r%d" % i if role == "result" else "_")
            key = f.value if f.value and f.value != "_" else f"{prefix}{i}"
            out.append(_Var(key, name, f.child("type"), scope.package_path, role, own=True))
    return out


def build_cfg(context: ContextRef, sites: Sequence[UnsafeUsageSite] = ()) -> EnrichedCfg:
    """Structural graph of a usage context: vertices, flow and access edges.

    Statement vertices carry their statement-type label and variable vertices
    their name label; ``label_vertices`` adds everything else.
    """
    if context.node.attrs.get("opaque"):
        raise UnsupportedContext(
            f"context at line {context.node.span[0]} could not be parsed")
    b = _Builder(context)
    flow: list[tuple[int, int, str]] = []
    if context.kind == "function-body":
        stmts, flow = b.build_function()
        stmts, flow = _reorder(stmts, flow)
    else:
        node = context.node
        v = Vertex(0, STATEMENT, {"stmt:declaration"}, node.span)
        v.meta.update(parts=[node], node=node, order=0)
        stmts = [v]
    vertices = list(stmts)
    edges: set[tuple[int, int, str]] = set(flow)
    acc = _Access(b, vertices, edges)
    if context.kind == "function-body":
        acc.cur = 0
        for info in _params(b.fn, b.scope):
            vid = acc.var(info)
            acc.edge(vid, "decl")
            if info.vartype == "result":
                b.result_ids.append(vid)
        for v in stmts[1:]:
            acc.cur = v.id
            _vertex_parts_access(acc, v)
    elif context.kind == "global-variable":
        node = context.node
        acc.cur = 0
        t = node.child("type")
        for n in node.all("name"):
            if n.value == "_":
                continue
            info = _Var(n.value, n.value, t or b.scope.globals.get(n.value),
                        b.scope.package_path, own=True, selfvar=True)
            acc.edge(acc.var(info), "decl")
        for val in node.all("value"):
            acc.read(val)
    cfg = EnrichedCfg(
        vertices,
        sorted((Edge(a, c, k) for a, c, k in edges), key=Edge.sort_key),
        CONTEXT_TYPE[context.kind],
        name=context.node.value or ",".join(n.value for n in context.node.all("name")),
    )
    cfg.meta["context"] = context
    cfg.usage_vertices = {s: map_usage_vertex(cfg, s) for s in sites}
    return cfg


def map_usage_vertex(cfg: EnrichedCfg, site: UnsafeUsageSite) -> int:
    """Smallest statement vertex whose own span holds the site; entry otherwise."""
    pos = (site.span[0], site.span[1])
    best, best_key = 0, None
    for v in cfg.statements():
        if v.span is None or v.meta.get("node") is None:
            continue
        start, end = (v.span[0], v.span[1]), (v.span[2], v.span[3])
        if start <= pos < end:
            # statement spans nest, so the innermost one starts last and ends first
            key = (start, (-end[0], -end[1]))
            if best_key is None or key > best_key:
                best, best_key = v.id, key
    return best


# -- labels --------------------------------------------------------------------

def _add_type(labels: set[str], t: AstNode | None, b: _Builder | None = None) -> None:
    for lab in type_labels(t):
        labels.add(f"type:{lab}")


def _expr_labels(e: AstNode, labels: set[str], b: _Builder) -> None:
    scope = b.scope
    stack = [e]
    while stack:
        n = stack.pop()
        k = n.kind
        if k == "binary-op":
            labels.add(f"op:binary/{n.value}")
        elif k == "unary-op":
            labels.add(f"op:unary/{n.value}")
        elif k == "assign" and n.value != "=":
            labels.add(f"op:assign/{n.value}")
        elif k == "literal":
            labels.add(f"type:{_LIT_TYPE[n.attrs['lit']]}")
        elif k in ("cast", "composite-literal"):
            t = n.child("type")
            if t is not None:
                _add_type(labels, t)
        elif k == "declaration":
            t = n.child("type")
            if n.attrs.get("keyword") == "type":
                _add_type(labels, t)
                labels.add(f"type:{n.value}")
                if references_type(t, n.value):
                    labels.add("selfref:type")
            elif t is not None:
                _add_type(labels, t)
        elif k == "call":
            _call_labels(n, labels, b, scope)
        if k == "call" and n.meta.get("builtin") and n.meta["func"] in ("make", "new"):
            args = n.all("arg")
            if args and args[0].kind in TYPE_KINDS:
                _add_type(labels, args[0])
        for c in reversed(n.children):
            if c.kind in TYPE_KINDS:
                continue
            stack.append(c)


def _call_labels(n: AstNode, labels: set[str], b: _Builder, scope: FileScope) -> None:
    m = n.meta
    fname = m.get("func")
    if fname is None:
        return
    if m.get("builtin"):
        labels.add(f"builtin:{fname}")
        return
    fn = b.fn
    if m.get("method"):
        labels.add(f"func:{fname}")
        if fn is not None and fn.all("receiver") and fname == "." + fn.value:
            labels.add("selfref:function")
        return
    labels.add(f"func:{fname}")
    pkg = m.get("package")
    if pkg:
        labels.add(f"pkg:{pkg}")
    if m.get("local_func"):
        labels.add("selfref:package")
        if scope.module_path:
            labels.add("selfref:module")
        callee = n.child("callee")
        if fn is not None and not fn.all("receiver") and callee.value == fn.value:
            labels.add("selfref:function")
    elif pkg and scope.in_module(pkg):
        labels.add("selfref:module")


def _var_labels(v: Vertex, b: _Builder) -> None:
    info: _Var = v.meta["info"]
    if info.vartype:
        v.labels.add(f"vartype:{info.vartype}")
    _add_type(v.labels, info.type_node)
    if info.package:
        v.labels.add(f"pkg:{info.package}")
    scope = b.scope
    if info.own:
        v.labels.add("selfref:package")
        if scope.module_path:
            v.labels.add("selfref:module")
    elif info.package and scope.in_module(info.package):
        v.labels.add("selfref:module")
    if info.selfvar:
        v.labels.add("selfref:variable")


def label_vertices(cfg: EnrichedCfg, context: ContextRef) -> EnrichedCfg:
    """Attach data-type, operator, function, package and self-reference labels."""
    b = _Builder(context)
    for v in cfg.vertices:
        if v.kind == VARIABLE:
            if "info" in v.meta:
                _var_labels(v, b)
            continue
        node = v.meta.get("node")
        t = v.labels_in("stmt")[0][5:]
        if t == "declaration":
            _decl_context_labels(v, node, b)
            continue
        for p in v.meta.get("parts", []):
            if p is not None:
                _expr_labels(p, v.labels, b)
        if t == "case" and node is not None and not node.child("comm"):
            for e in node.all("expr"):
                if e.kind in TYPE_KINDS:
                    _add_type(v.labels, e)
    return cfg


def _decl_context_labels(v: Vertex, node: AstNode, b: _Builder) -> None:
    if node.kind == "type-decl":
        t = node.child("type")
        _add_type(v.labels, t)
        v.labels.add(f"type:{node.value}")
        if references_type(t, node.value):
            v.labels.add("selfref:type")
        return
    t = node.child("type")
    if t is not None:
        _add_type(v.labels, t)
    for val in node.all("value"):
        _expr_labels(val, v.labels, b)


def extract_cfg(context: ContextRef, sites: Sequence[UnsafeUsageSite] = ()) -> EnrichedCfg:
    """``build_cfg`` followed by ``label_vertices``."""
    return label_vertices(build_cfg(context, sites), context)


def edge_rank(kind: str) -> int:
    return EDGE_RANK[kind]
