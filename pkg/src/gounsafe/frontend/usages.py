"""Locate ``unsafe`` usage sites and the declaration that encloses each one."""
from __future__ import annotations

from dataclasses import dataclass, field

from gounsafe.errors import OrphanUsage
from gounsafe.frontend.ast import STATEMENT_KINDS, AstNode, Span
from gounsafe.frontend.lexer import IDENT, Token
from gounsafe.frontend.parser import SourceUnit
from gounsafe.frontend.resolve import file_scope, infer_type, local_env, type_string

API_MEMBERS = ("Pointer", "Sizeof", "Alignof", "Offsetof")
UINTPTR_CONVERSION = "uintptr-conversion"

CONTEXT_KINDS = {
    "function-decl": "function-body",
    "type-decl": "type-declaration",
    "global-var-decl": "global-variable",
}
_OPAQUE_CONTEXT_KW = {"func": "function-body", "type": "type-declaration",
                      "var": "global-variable", "const": "global-variable"}


@dataclass(eq=False)
class ContextRef:
    kind: str  # function-body | type-declaration | global-variable
    node: AstNode
    root: AstNode | None = None
    unit: SourceUnit | None = None

    @property
    def opaque(self) -> bool:
        return bool(self.node.attrs.get("opaque"))


@dataclass(eq=False)
class UnsafeUsageSite:
    unit: SourceUnit
    span: Span
    api_member: str
    context: ContextRef | None = None
    stmt_span: Span | None = None
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def line(self) -> int:
        return self.span[0]

    @property
    def key(self) -> tuple[str, int, int, str]:
        return (self.unit.path, self.span[0], self.span[1], self.api_member)


def _unsafe_aliases(root: AstNode) -> set[str]:
    return {a for a, p in file_scope(root).imports.items() if p == "unsafe"}


def _is_unsafe_pointer_type(t: AstNode | None) -> bool:
    return t is not None and type_string(t) == "unsafe.Pointer"


def _mentions_unsafe_pointer(e: AstNode) -> bool:
    for n in e.walk():
        if n.kind == "type-name" and n.resolved_package == "unsafe" and n.value == "Pointer":
            return True
        if n.kind == "selector-chain" and n.resolved_package == "unsafe" \
                and n.all("field")[0].value == "Pointer":
            return True
    return False


def _scan_tokens(tokens: list[Token], aliases: set[str]) -> list[tuple[Token, str]]:
    """Token-level usage scan used for opaque leaves and cross-checks."""
    out = []
    for i, t in enumerate(tokens):
        if t.kind == IDENT and t.value in aliases and i + 2 < len(tokens) \
                and tokens[i + 1].is_op(".") and tokens[i + 2].kind == IDENT \
                and tokens[i + 2].value in API_MEMBERS \
                and not (i > 0 and tokens[i - 1].is_op(".")):
            out.append((t, tokens[i + 2].value))
        elif t.kind == IDENT and t.value == "uintptr" and i + 1 < len(tokens) \
                and tokens[i + 1].is_op("("):
            depth, j = 0, i + 1
            while j < len(tokens):
                if tokens[j].is_op("(", "[", "{"):
                    depth += 1
                elif tokens[j].is_op(")", "]", "}"):
                    depth -= 1
                    if depth == 0:
                        break
                j += 1
            inner = tokens[i + 2:j]
            if any(
                a.kind == IDENT and a.value in aliases and inner[k + 1].is_op(".")
                and inner[k + 2].value == "Pointer"
                for k, a in enumerate(inner[:-2])
            ):
                out.append((t, UINTPTR_CONVERSION))
    return out


def count_qualified_tokens(text: str) -> int:
    """Number of ``unsafe.<member>`` tokens in raw source text."""
    from gounsafe.frontend.lexer import tokenize

    toks = tokenize(text)
    aliases: set[str] = set()
    for i, t in enumerate(toks):
        if t.is_kw("import"):
            # single or grouped import specs
            j = i + 1
            while j < len(toks) and not toks[j].is_kw("func", "type", "var", "const"):
                if toks[j].kind == "STRING" and toks[j].value[1:-1] == "unsafe":
                    prev = toks[j - 1]
                    aliases.add(prev.value if prev.kind == IDENT else "unsafe")
                j += 1
    return sum(1 for _, m in _scan_tokens(toks, aliases) if m != UINTPTR_CONVERSION)


def _innermost_statement(ctx_node: AstNode, line: int, col: int) -> AstNode | None:
    best = None
    node = ctx_node
    while True:
        nxt = None
        for c in node.children:
            if c.kind == "func-lit":
                continue
            if c.contains(line, col):
                nxt = c
                break
        if nxt is None:
            return best
        if nxt.kind in STATEMENT_KINDS and nxt.kind not in ("block", "labeled"):
            best = nxt
        node = nxt


def _site_for_node(n: AstNode, member: str, unit: SourceUnit) -> UnsafeUsageSite:
    return UnsafeUsageSite(unit, n.span, member)


def find_unsafe_usages(root: AstNode, unit: SourceUnit) -> list[UnsafeUsageSite]:
    """All ``unsafe`` usage sites of a parsed file, ordered by position."""
    aliases = _unsafe_aliases(root)
    if not aliases:
        return []
    scope = file_scope(root)
    sites: list[UnsafeUsageSite] = []
    for decl in root.children:
        if decl.kind == "import":
            continue
        env = local_env(decl, scope) if decl.kind == "function-decl" else {}
        for n in decl.walk():
            if n.attrs.get("opaque"):
                for tok, member in _scan_tokens(n.meta.get("tokens", []), aliases):
                    sites.append(UnsafeUsageSite(
                        unit, (tok.line, tok.col, tok.end_line, tok.end_col), member))
            elif n.kind == "type-name" and n.resolved_package == "unsafe" \
                    and n.attrs.get("qualifier") in aliases and n.value in API_MEMBERS:
                sites.append(_site_for_node(n, n.value, unit))
            elif n.kind == "selector-chain" and n.resolved_package == "unsafe" \
                    and n.child("base").value in aliases:
                member = n.all("field")[0].value
                if member in API_MEMBERS:
                    sites.append(_site_for_node(n, member, unit))
            elif n.kind == "cast" and n.child("type").kind == "type-name" \
                    and n.child("type").value == "uintptr" \
                    and not n.child("type").attrs.get("qualifier"):
                arg = n.child("arg")
                if _mentions_unsafe_pointer(arg) or _is_unsafe_pointer_type(infer_type(arg, scope, env)):
                    sites.append(_site_for_node(n, UINTPTR_CONVERSION, unit))
    sites.sort(key=lambda s: (s.span, s.api_member))
    for s in sites:
        s.context = _resolve_or_none(root, s)
        if s.context is not None and not s.context.opaque and s.context.kind == "function-body":
            stmt = _innermost_statement(s.context.node, s.span[0], s.span[1])
            s.stmt_span = stmt.span if stmt is not None else s.context.node.span
        elif s.context is not None:
            s.stmt_span = s.context.node.span
    return sites


def _resolve_or_none(root: AstNode, site: UnsafeUsageSite) -> ContextRef | None:
    try:
        return resolve_usage_context(root, site)
    except OrphanUsage:
        return None


def resolve_usage_context(root: AstNode, site: UnsafeUsageSite) -> ContextRef:
    """The top-level declaration enclosing ``site``.

    Opaque top-level leaves are classified by their leading keyword so the
    caller can report them; building a graph for them fails later.
    """
    line, col = site.span[0], site.span[1]
    for d in root.children:
        if not d.contains(line, col):
            continue
        if d.kind in CONTEXT_KINDS:
            return ContextRef(CONTEXT_KINDS[d.kind], d, root, site.unit)
        if d.attrs.get("opaque"):
            toks = d.meta.get("tokens") or []
            kind = _OPAQUE_CONTEXT_KW.get(toks[0].value) if toks else None
            if kind is not None:
                return ContextRef(kind, d, root, site.unit)
    raise OrphanUsage(f"usage at {line}:{col} is outside any function, type or variable declaration")
