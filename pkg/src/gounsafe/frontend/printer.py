"""Render a syntax tree back to Go source."""
from __future__ import annotations

from gounsafe.frontend.ast import AstNode

_INDENT = "\t"


def format_source(root: AstNode) -> str:
    lines = [f"package {root.value}", ""]
    for d in root.children:
        lines.extend(_decl(d, 0))
    return "\n".join(lines) + "\n"


def _decl(d: AstNode, depth: int) -> list[str]:
    pad = _INDENT * depth
    k = d.kind
    if d.attrs.get("opaque"):
        return [pad + d.value]
    if k == "import":
        alias = d.child("alias")
        return [pad + "import " + (alias.value + " " if alias else "") + f'"{d.value}"']
    if k == "function-decl":
        recv = d.all("receiver")
        head = "func "
        if recv:
            head += "(" + _fields(recv) + ") "
        head += d.value + _signature(d)
        body = d.child("body")
        if body is None:
            return [pad + head]
        return [pad + head + " {"] + _stmts(body.children, depth + 1) + [pad + "}"]
    if k == "type-decl" or (k == "declaration" and d.attrs.get("keyword") == "type"):
        eq = "= " if d.attrs.get("alias") else ""
        return [pad + f"type {d.value} {eq}{format_type(d.child('type'))}"]
    if k in ("global-var-decl", "declaration"):
        s = d.attrs.get("keyword", "var") + " " + ", ".join(n.value for n in d.all("name"))
        t = d.child("type")
        if t is not None:
            s += " " + format_type(t)
        vals = d.all("value")
        if vals:
            s += " = " + ", ".join(format_expr(v) for v in vals)
        return [pad + s]
    raise ValueError(f"cannot print declaration {d!r}")


def _fields(fields: list[AstNode]) -> str:
    out = []
    for f in fields:
        t = format_type(f.child("type"))
        out.append(f"{f.value} {t}" if f.value else t)
    return ", ".join(out)


def _signature(n: AstNode) -> str:
    s = "(" + _fields(n.all("param")) + ")"
    res = n.all("result")
    if len(res) == 1 and not res[0].value:
        s += " " + format_type(res[0].child("type"))
    elif res:
        s += " (" + _fields(res) + ")"
    return s


def format_type(t: AstNode) -> str:
    k = t.kind
    if k == "type-name":
        q = t.attrs.get("qualifier")
        return f"{q}.{t.value}" if q else t.value
    if k == "pointer-type":
        return "*" + format_type(t.child("elem"))
    if k == "slice-type":
        return "[]" + format_type(t.child("elem"))
    if k == "ellipsis-type":
        return "..." + format_type(t.child("elem"))
    if k == "array-type":
        ln = t.child("len")
        return "[" + (ln.value if ln.kind == "ellipsis-len" else format_expr(ln)) + "]" + format_type(t.child("elem"))
    if k == "map-type":
        return f"map[{format_type(t.child('key'))}]{format_type(t.child('elem'))}"
    if k == "chan-type":
        d = t.attrs.get("dir")
        pre = "<-chan " if d == "recv" else ("chan<- " if d == "send" else "chan ")
        return pre + format_type(t.child("elem"))
    if k == "func-type":
        return "func" + _signature(t)
    if k == "struct-type":
        parts = []
        for f in t.all("field"):
            ft = format_type(f.child("type"))
            s = ft if f.attrs.get("embedded") else f"{f.value} {ft}"
            if "tag" in f.attrs:
                s += " " + f.attrs["tag"]
            parts.append(s)
        return "struct{" + "; ".join(parts) + "}"
    if k == "interface-type":
        parts = [m.value + _signature(m) for m in t.all("method")]
        parts += [format_type(e) for e in t.all("embed")]
        return "interface{" + "; ".join(parts) + "}"
    if k == "ident":
        return t.value
    raise ValueError(f"cannot print type {t!r}")


def _cast_type(t: AstNode) -> str:
    s = format_type(t)
    if t.kind in ("pointer-type", "func-type", "chan-type"):
        return f"({s})"
    return s


def format_expr(e: AstNode) -> str:
    k = e.kind
    if k in ("ident", "literal"):
        return e.value
    if k == "paren":
        return "(" + format_expr(e.children[0]) + ")"
    if k == "unary-op":
        return e.value + format_expr(e.children[0])
    if k == "binary-op":
        return f"{format_expr(e.child('left'))} {e.value} {format_expr(e.child('right'))}"
    if k == "selector-chain":
        return format_expr(e.child("base")) + "".join("." + f.value for f in e.all("field"))
    if k == "call":
        args = ", ".join(format_expr(a) for a in e.all("arg"))
        if e.attrs.get("ellipsis"):
            args += "..."
        return format_expr(e.child("callee")) + "(" + args + ")"
    if k == "cast":
        return _cast_type(e.child("type")) + "(" + format_expr(e.child("arg")) + ")"
    if k == "index":
        return f"{format_expr(e.child('base'))}[{format_expr(e.child('index'))}]"
    if k == "slice-expr":
        parts = [e.child(r) for r in ("lo", "hi", "max")]
        if not e.attrs.get("three"):
            parts = parts[:2]
        inner = ":".join("" if p is None else format_expr(p) for p in parts)
        return f"{format_expr(e.child('base'))}[{inner}]"
    if k == "type-assert":
        t = "type" if e.attrs.get("type_switch") else format_type(e.child("type"))
        return f"{format_expr(e.child('base'))}.({t})"
    if k == "composite-literal":
        t = e.child("type")
        elems = []
        for el in e.all("elem"):
            key = el.child("key")
            v = format_expr(el.child("value"))
            elems.append(f"{format_expr(key)}: {v}" if key is not None else v)
        return (format_type(t) if t is not None else "") + "{" + ", ".join(elems) + "}"
    if k == "func-lit":
        body = _stmts(e.child("body").children, 1)
        inner = "; ".join(s.strip() for s in body)
        return "func" + _signature(e.child("type")) + " {" + (" " + inner + " " if inner else "") + "}"
    return format_type(e)


def _simple(s: AstNode) -> str:
    k = s.kind
    if s.attrs.get("opaque"):
        return s.value
    if k in ("assign", "short-var-decl"):
        lhs = ", ".join(format_expr(x) for x in s.all("lhs"))
        rhs = ", ".join(format_expr(x) for x in s.all("rhs"))
        return f"{lhs} {s.value} {rhs}"
    if k == "expr-stmt":
        return format_expr(s.children[0])
    if k == "incdec":
        return format_expr(s.children[0]) + s.value
    if k == "send":
        return f"{format_expr(s.child('chan'))} <- {format_expr(s.child('value'))}"
    raise ValueError(f"not a simple statement: {s!r}")


def _stmts(stmts: list[AstNode], depth: int) -> list[str]:
    out: list[str] = []
    for s in stmts:
        out.extend(_stmt(s, depth))
    return out


def _stmt(s: AstNode, depth: int) -> list[str]:
    pad = _INDENT * depth
    k = s.kind
    if k in ("assign", "short-var-decl", "expr-stmt", "incdec", "send"):
        return [pad + _simple(s)]
    if k == "declaration":
        return _decl(s, depth)
    if k == "return":
        vals = ", ".join(format_expr(v) for v in s.all("value"))
        return [pad + ("return " + vals if vals else "return")]
    if k in ("go", "defer"):
        return [pad + k + " " + format_expr(s.children[0])]
    if k == "branch":
        lab = s.attrs.get("label")
        return [pad + s.value + (" " + lab if lab else "")]
    if k == "labeled":
        inner = s.child("stmt")
        return [pad + s.value + ":"] + (_stmt(inner, depth) if inner else [])
    if k == "block":
        return [pad + "{"] + _stmts(s.children, depth + 1) + [pad + "}"]
    if k == "if":
        return _if(s, depth, pad + "if ")
    if k == "for":
        if s.attrs.get("range"):
            lhs = [format_expr(x) for x in s.all("key") + s.all("value")]
            head = "for "
            if lhs:
                head += ", ".join(lhs) + (" := " if s.attrs.get("define") else " = ")
            head += "range " + format_expr(s.child("range"))
        elif s.attrs.get("clauses"):
            init, cond, post = s.child("init"), s.child("cond"), s.child("post")
            head = "for " + (_simple(init) if init else "") + "; " + \
                (format_expr(cond) if cond else "") + "; " + (_simple(post) if post else "")
        elif s.child("cond") is not None:
            head = "for " + format_expr(s.child("cond"))
        else:
            head = "for"
        return [pad + head.rstrip() + " {"] + _stmts(s.child("body").children, depth + 1) + [pad + "}"]
    if k == "switch":
        head = "switch "
        init = s.child("init")
        if init is not None:
            head += _simple(init) + "; "
        bind, tag = s.child("bind"), s.child("tag")
        if bind is not None:
            head += bind.value + " := "
        if tag is not None:
            head += format_expr(tag)
        return [pad + head.rstrip() + " {"] + _cases(s, depth) + [pad + "}"]
    if k == "select":
        return [pad + "select {"] + _cases(s, depth) + [pad + "}"]
    raise ValueError(f"cannot print statement {s!r}")


def _if(s: AstNode, depth: int, prefix: str) -> list[str]:
    pad = _INDENT * depth
    init = s.child("init")
    head = prefix + (_simple(init) + "; " if init is not None else "") + format_expr(s.child("cond"))
    lines = [head + " {"] + _stmts(s.child("then").children, depth + 1)
    els = s.child("else")
    if els is None:
        return lines + [pad + "}"]
    if els.kind == "if":
        return lines + _if(els, depth, pad + "} else if ")
    return lines + [pad + "} else {"] + _stmts(els.children, depth + 1) + [pad + "}"]


def _cases(s: AstNode, depth: int) -> list[str]:
    pad = _INDENT * depth
    out = []
    for c in s.all("case"):
        if c.attrs.get("default"):
            head = "default:"
        elif c.child("comm") is not None:
            head = "case " + _simple(c.child("comm")) + ":"
        else:
            head = "case " + ", ".join(format_expr(e) for e in c.all("expr")) + ":"
        out.append(pad + head)
        out.extend(_stmts(c.all("stmt"), depth + 1))
    return out
