"""Local, best-effort name and type resolution.

This is not a type checker.  It knows the file's own declarations, its
imports and Go's predeclared identifiers, which is enough to tell casts from
calls and to name the types a statement instantiates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from gounsafe.frontend.ast import TYPE_KINDS, AstNode

BUILTIN_TYPES = frozenset(
    {
        "bool", "byte", "complex64", "complex128", "error", "float32", "float64",
        "int", "int8", "int16", "int32", "int64", "rune", "string", "uint",
        "uint8", "uint16", "uint32", "uint64", "uintptr", "any",
    }
)
BUILTIN_FUNCS = (
    "append", "cap", "close", "complex", "copy", "delete", "imag", "len",
    "make", "new", "panic", "print", "println", "real", "recover",
)
PREDECLARED_CONSTS = frozenset({"true", "false", "nil", "iota"})


@dataclass
class FileScope:
    package_name: str
    package_path: str
    module_path: str
    imports: dict[str, str] = field(default_factory=dict)  # alias -> import path
    types: dict[str, AstNode] = field(default_factory=dict)
    funcs: dict[str, AstNode] = field(default_factory=dict)
    methods: dict[str, list[AstNode]] = field(default_factory=dict)
    globals: dict[str, AstNode | None] = field(default_factory=dict)  # name -> type node

    def import_alias_of(self, path: str) -> list[str]:
        return [a for a, p in self.imports.items() if p == path]

    def in_module(self, path: str) -> bool:
        return bool(self.module_path) and (
            path == self.module_path or path.startswith(self.module_path + "/")
        )


def file_scope(root: AstNode) -> FileScope:
    return root.meta["scope"]


def _default_alias(path: str) -> str:
    last = path.rstrip("/").split("/")[-1]
    # gopkg.in/yaml.v2 style and go-foo style names
    if "." in last and path.startswith("gopkg.in/"):
        last = last.split(".")[0]
    return last.replace("-", "_")


def build_scope(root: AstNode, unit) -> FileScope:
    scope = FileScope(root.value or "", unit.import_path, unit.module_path)
    for d in root.children:
        if d.kind == "import":
            alias = d.child("alias")
            scope.imports[alias.value if alias else _default_alias(d.value)] = d.value
        elif d.kind == "type-decl":
            scope.types[d.value] = d.child("type")
        elif d.kind == "function-decl":
            if d.all("receiver"):
                scope.methods.setdefault(d.value, []).append(d)
            else:
                scope.funcs[d.value] = d
        elif d.kind == "global-var-decl":
            for name in d.all("name"):
                scope.globals[name.value] = d.child("type")
    return scope


# -- type nodes ----------------------------------------------------------------

def make_type_name(name: str, package: str | None = None) -> AstNode:
    n = AstNode("type-name", value=name)
    if package:
        n.attrs["qualifier"] = package.rsplit("/", 1)[-1]
        n.resolved_package = package
    n.resolved_type = f"{package}.{name}" if package else name
    return n


def make_type(kind: str, **children: AstNode) -> AstNode:
    n = AstNode(kind)
    for role, c in children.items():
        n.add(c, role)
    return n


def type_string(t: AstNode | None) -> str:
    """Canonical spelling of a type node; qualified names use import paths."""
    if t is None:
        return "?"
    k = t.kind
    if k == "type-name":
        if t.resolved_package:
            return f"{t.resolved_package}.{t.value}"
        q = t.attrs.get("qualifier")
        return f"{q}.{t.value}" if q else t.value
    if k == "pointer-type":
        return "*" + type_string(t.child("elem"))
    if k == "slice-type":
        return "[]" + type_string(t.child("elem"))
    if k == "ellipsis-type":
        return "..." + type_string(t.child("elem"))
    if k == "array-type":
        ln = t.child("len")
        return f"[{_expr_text(ln)}]" + type_string(t.child("elem"))
    if k == "map-type":
        return f"map[{type_string(t.child('key'))}]{type_string(t.child('elem'))}"
    if k == "chan-type":
        d = t.attrs.get("dir")
        pre = "<-chan " if d == "recv" else ("chan<- " if d == "send" else "chan ")
        return pre + type_string(t.child("elem"))
    if k == "func-type":
        ps = ", ".join(type_string(p.child("type")) for p in t.all("param"))
        rs = [type_string(r.child("type")) for r in t.all("result")]
        res = "" if not rs else (" " + rs[0] if len(rs) == 1 else " (" + ", ".join(rs) + ")")
        return f"func({ps}){res}"
    if k == "struct-type":
        parts = []
        for f in t.all("field"):
            ft = type_string(f.child("type"))
            parts.append(ft if f.attrs.get("embedded") else f"{f.value} {ft}")
        return "struct{" + "; ".join(parts) + "}"
    if k == "interface-type":
        parts = [m.value + "()" for m in t.all("method")]
        parts += [type_string(e) for e in t.all("embed")]
        return "interface{" + "; ".join(parts) + "}"
    return "?"


def _expr_text(n: AstNode | None) -> str:
    if n is None:
        return ""
    if n.kind in ("literal", "ident", "ellipsis-len"):
        return n.value
    from gounsafe.frontend.printer import format_expr

    return format_expr(n)


def type_labels(t: AstNode | None) -> list[str]:
    """Datatype labels for a type: the full type plus its parts.

    ``map[string]**[]int`` yields Map, string, Pointer, Slice, int and the
    composite itself.
    """
    if t is None:
        return []
    out: list[str] = []

    def visit(n: AstNode, seen: set[int]) -> None:
        k = n.kind
        if k == "type-name":
            out.append(type_string(n))
        elif k == "pointer-type":
            out.append("Pointer")
            visit(n.child("elem"), seen)
        elif k in ("slice-type", "ellipsis-type"):
            out.append("Slice")
            visit(n.child("elem"), seen)
        elif k == "array-type":
            out.append("Array")
            visit(n.child("elem"), seen)
        elif k == "map-type":
            out.append("Map")
            visit(n.child("key"), seen)
            visit(n.child("elem"), seen)
        elif k == "chan-type":
            out.append("Chan")
            visit(n.child("elem"), seen)
        elif k == "func-type":
            out.append("Func")
            for p in n.all("param") + n.all("result"):
                visit(p.child("type"), seen)
        elif k == "struct-type":
            out.append("Struct")
            for f in n.all("field"):
                visit(f.child("type"), seen)
        elif k == "interface-type":
            out.append("Interface")

    out.append(type_string(t))
    visit(t, set())
    seen: set[str] = set()
    uniq = []
    for lab in out:
        if lab not in seen:
            seen.add(lab)
            uniq.append(lab)
    return uniq


def references_type(t: AstNode | None, name: str) -> bool:
    if t is None:
        return False
    return any(
        n.kind == "type-name" and n.value == name and not n.attrs.get("qualifier")
        for n in t.walk()
    )


# -- expression helpers ------------------------------------------------------

def is_type_expr(e: AstNode, scope: FileScope, locals_: frozenset[str] = frozenset(),
                 strong: bool = False) -> bool:
    """Whether ``e`` (parsed as an expression) denotes a type."""
    k = e.kind
    if k in TYPE_KINDS:
        return True
    if k == "ident":
        if e.value in locals_:
            return False
        return e.value in scope.types or e.value in BUILTIN_TYPES
    if k == "paren":
        return is_type_expr(e.children[0], scope, locals_, strong=True)
    if k == "unary-op" and e.value == "*":
        return strong and is_type_expr(e.children[0], scope, locals_, strong=True)
    if k == "selector-chain":
        base = e.child("base")
        fields = e.all("field")
        if base.kind != "ident" or len(fields) != 1 or base.value in locals_:
            return False
        path = scope.imports.get(base.value)
        if path is None:
            return False
        if path == "unsafe":
            return fields[0].value == "Pointer"
        return strong and fields[0].value[:1].isupper()
    return False


def expr_to_type(e: AstNode, scope: FileScope) -> AstNode:
    """Rewrite an expression already known to denote a type into a type node."""
    k = e.kind
    if k in TYPE_KINDS:
        return e
    if k == "ident":
        n = AstNode("type-name", value=e.value, span=e.span)
        return n
    if k == "paren":
        return expr_to_type(e.children[0], scope)
    if k == "unary-op":
        n = AstNode("pointer-type", span=e.span)
        n.add(expr_to_type(e.children[0], scope), "elem")
        return n
    if k == "selector-chain":
        base = e.child("base")
        f = e.all("field")[0]
        n = AstNode("type-name", value=f.value, span=e.span)
        n.attrs["qualifier"] = base.value
        return n
    raise ValueError(f"not a type expression: {e!r}")


def collect_local_names(fn: AstNode) -> frozenset[str]:
    """Names declared anywhere inside a function (flow-insensitive)."""
    names: set[str] = set()
    for role in ("receiver", "param", "result"):
        for f in fn.all(role):
            if f.value:
                names.add(f.value)
    body = fn.child("body")
    if body is None:
        return frozenset(names)
    for n in body.walk():
        if n.kind == "short-var-decl":
            names.update(c.value for c in n.all("lhs") if c.kind == "ident")
        elif n.kind == "declaration" and n.attrs.get("keyword") in ("var", "const"):
            names.update(c.value for c in n.all("name"))
        elif n.kind == "for" and n.attrs.get("define"):
            names.update(c.value for c in n.all("key") + n.all("value") if c.kind == "ident")
        elif n.kind == "switch" and n.child("bind") is not None:
            names.add(n.child("bind").value)
        elif n.kind == "func-lit":
            for f in n.child("type").all("param") + n.child("type").all("result"):
                if f.value:
                    names.add(f.value)
    names.discard("_")
    return frozenset(names)


def local_type_names(fn: AstNode) -> dict[str, AstNode]:
    body = fn.child("body")
    if body is None:
        return {}
    return {
        n.value: n.child("type")
        for n in body.walk()
        if n.kind == "declaration" and n.attrs.get("keyword") == "type"
    }


# -- the resolution pass -----------------------------------------------------

def resolve_file(root: AstNode, unit) -> FileScope:
    scope = build_scope(root, unit)
    root.meta["scope"] = scope
    for d in root.children:
        if d.kind == "function-decl":
            locals_ = collect_local_names(d)
            ltypes = local_type_names(d)
            d.meta["locals"] = locals_
            view = scope
            if ltypes:
                view = FileScope(scope.package_name, scope.package_path, scope.module_path,
                                 scope.imports, {**scope.types, **ltypes}, scope.funcs,
                                 scope.methods, scope.globals)
            _resolve_tree(d, view, locals_, d)
        else:
            _resolve_tree(d, scope, frozenset(), None)
        if d.kind == "global-var-decl":
            t = d.child("type")
            if t is None and d.all("value"):
                t = infer_type(d.all("value")[0], scope, {})
            d.resolved_type = type_string(t) if t is not None else None
            if t is not None and d.child("type") is None:
                scope.globals.update({n.value: t for n in d.all("name")})
    return scope


def _resolve_tree(node: AstNode, scope: FileScope, locals_: frozenset[str],
                  fn: AstNode | None) -> None:
    # convert bottom-up so nested conversions are seen first
    for i, c in enumerate(node.children):
        _resolve_tree(c, scope, locals_, fn)
    if node.kind == "call":
        _resolve_call(node, scope, locals_, fn)
    elif node.kind == "composite-literal":
        t = node.child("type")
        if t is not None and t.kind not in TYPE_KINDS and is_type_expr(t, scope, locals_, strong=True):
            nt = expr_to_type(t, scope)
            _replace_child(node, t, nt, "type")
            _resolve_type_names(nt, scope)
        t = node.child("type")
        if t is not None:
            node.resolved_type = type_string(t)
    elif node.kind in TYPE_KINDS:
        _resolve_type_names(node, scope)
    elif node.kind == "selector-chain":
        base = node.child("base")
        if base.kind == "ident" and base.value in scope.imports and base.value not in locals_:
            node.resolved_package = scope.imports[base.value]


def _resolve_type_names(t: AstNode, scope: FileScope) -> None:
    for n in t.walk():
        if n.kind == "type-name":
            q = n.attrs.get("qualifier")
            if q is not None and q in scope.imports:
                n.resolved_package = scope.imports[q]
            n.resolved_type = type_string(n)
    t.resolved_type = type_string(t)


def _replace_child(parent: AstNode, old: AstNode, new: AstNode, role: str) -> None:
    new.role = role
    parent.children[parent.children.index(old)] = new


def _resolve_call(node: AstNode, scope: FileScope, locals_: frozenset[str],
                  fn: AstNode | None) -> None:
    callee = node.child("callee")
    args = node.all("arg")
    if len(args) == 1 and not node.attrs.get("ellipsis") and is_type_expr(callee, scope, locals_):
        t = expr_to_type(callee, scope)
        _resolve_type_names(t, scope)
        node.kind = "cast"
        _replace_child(node, callee, t, "type")
        node.resolved_type = type_string(t)
        return
    m = node.meta
    if callee.kind == "ident":
        name = callee.value
        if name in locals_:
            m["unresolved"] = True
            m["callee_var"] = name
        elif name in BUILTIN_FUNCS and name not in scope.funcs:
            m["func"] = name
            m["builtin"] = True
            if name in ("make", "new") and args and is_type_expr(args[0], scope, locals_, strong=True):
                t = expr_to_type(args[0], scope)
                _resolve_type_names(t, scope)
                _replace_child(node, args[0], t, "arg")
        else:
            m["func"] = f"{scope.package_path}.{name}" if scope.package_path else name
            m["package"] = scope.package_path
            node.resolved_package = scope.package_path or None
            m["local_func"] = True
        return
    if callee.kind == "selector-chain":
        base = callee.child("base")
        fields = callee.all("field")
        if base.kind == "ident" and base.value in scope.imports and base.value not in locals_ \
                and len(fields) == 1:
            path = scope.imports[base.value]
            m["func"] = f"{path}.{fields[0].value}"
            m["package"] = path
            node.resolved_package = path
            return
        m["func"] = "." + fields[-1].value
        m["method"] = True
        return
    m["unresolved"] = True


# -- inference ---------------------------------------------------------------

_LIT_TYPES = {"INT": "int", "FLOAT": "float64", "IMAG": "complex128", "CHAR": "rune", "STRING": "string"}
_COMPARISONS = frozenset({"==", "!=", "<", "<=", ">", ">=", "&&", "||"})


def infer_type(e: AstNode | None, scope: FileScope, env: dict[str, AstNode | None]) -> AstNode | None:
    """Best-effort static type of an expression, or None when unknown."""
    if e is None:
        return None
    k = e.kind
    if k == "literal":
        return make_type_name(_LIT_TYPES[e.attrs["lit"]])
    if k in ("cast", "composite-literal"):
        return e.child("type")
    if k == "ident":
        if e.value in env:
            return env[e.value]
        if e.value in ("true", "false"):
            return make_type_name("bool")
        return scope.globals.get(e.value)
    if k == "paren":
        return infer_type(e.children[0], scope, env)
    if k == "unary-op":
        inner = infer_type(e.children[0], scope, env)
        if e.value == "&":
            return make_type("pointer-type", elem=inner) if inner is not None else None
        if e.value == "*":
            return inner.child("elem") if inner is not None and inner.kind == "pointer-type" else None
        if e.value == "!":
            return make_type_name("bool")
        return inner
    if k == "binary-op":
        if e.value in _COMPARISONS:
            return make_type_name("bool")
        return infer_type(e.child("left"), scope, env) or infer_type(e.child("right"), scope, env)
    if k == "call":
        m = e.meta
        args = e.all("arg")
        if m.get("builtin") and args:
            if m["func"] == "new" and args[0].kind in TYPE_KINDS:
                return make_type("pointer-type", elem=args[0])
            if m["func"] == "make" and args[0].kind in TYPE_KINDS:
                return args[0]
            if m["func"] == "len" or m["func"] == "cap":
                return make_type_name("int")
            if m["func"] == "append":
                return infer_type(args[0], scope, env)
        if m.get("local_func"):
            fn = scope.funcs.get(e.child("callee").value)
            if fn is not None and fn.all("result"):
                return fn.all("result")[0].child("type")
        if m.get("func") in ("unsafe.Sizeof", "unsafe.Alignof", "unsafe.Offsetof"):
            return make_type_name("uintptr")
        return None
    if k == "selector-chain":
        base = e.child("base")
        t = infer_type(base, scope, env)
        for f in e.all("field"):
            t = field_type(t, f.value, scope)
            if t is None:
                return None
        return t
    if k == "index":
        t = infer_type(e.child("base"), scope, env)
        t = underlying(t, scope)
        if t is not None and t.kind in ("slice-type", "array-type", "map-type"):
            return t.child("elem")
        return None
    if k == "slice-expr":
        return infer_type(e.child("base"), scope, env)
    if k == "type-assert":
        return e.child("type")
    return None


def underlying(t: AstNode | None, scope: FileScope, depth: int = 0) -> AstNode | None:
    while t is not None and t.kind == "type-name" and not t.attrs.get("qualifier") \
            and t.value in scope.types and depth < 8:
        t = scope.types[t.value]
        depth += 1
    return t


def field_type(t: AstNode | None, name: str, scope: FileScope) -> AstNode | None:
    t = underlying(t, scope)
    if t is not None and t.kind == "pointer-type":
        t = underlying(t.child("elem"), scope)
    if t is None or t.kind != "struct-type":
        return None
    for f in t.all("field"):
        if f.value == name:
            return f.child("type")
    return None


def local_env(fn: AstNode, scope: FileScope) -> dict[str, AstNode | None]:
    """Flow-insensitive map from local names to their (best-effort) types."""
    env: dict[str, AstNode | None] = {}
    for role in ("receiver", "param", "result"):
        for f in fn.all(role):
            if f.value:
                env[f.value] = f.child("type")
    body = fn.child("body")
    if body is None:
        return env
    for n in body.walk():
        if n.kind == "declaration" and n.attrs.get("keyword") in ("var", "const"):
            t = n.child("type")
            vals = n.all("value")
            for i, name in enumerate(n.all("name")):
                if t is None and i < len(vals):
                    env[name.value] = infer_type(vals[i], scope, env)
                else:
                    env[name.value] = t
        elif n.kind == "short-var-decl":
            lhs, rhs = n.all("lhs"), n.all("rhs")
            for i, x in enumerate(lhs):
                if x.kind == "ident" and x.value not in env:
                    env[x.value] = infer_type(rhs[i], scope, env) if len(lhs) == len(rhs) else None
        elif n.kind == "for" and n.attrs.get("define"):
            for x in n.all("key") + n.all("value"):
                if x.kind == "ident":
                    env.setdefault(x.value, None)
    env.pop("_", None)
    return env
