"""Recursive-descent parser for the supported Go subset.

Declarations or statements that cannot be parsed but are lexically sound are
kept as opaque ``expr-stmt`` leaves carrying their raw text, so real-world files
never fail wholesale.  Only lexical garbage or unbalanced brackets raise.
"""
from __future__ import annotations

from dataclasses import dataclass

from gounsafe.errors import ParseError
from gounsafe.frontend.ast import AstNode
from gounsafe.frontend.lexer import (
    CHAR, EOF, FLOAT, IDENT, IMAG, INT, KEYWORD, OP, STRING, Token, tokenize,
)

BINARY_PRECEDENCE = {
    "||": 1, "&&": 2,
    "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
    "+": 4, "-": 4, "|": 4, "^": 4,
    "*": 5, "/": 5, "%": 5, "<<": 5, ">>": 5, "&": 5, "&^": 5,
}
UNARY_OPS = frozenset({"+", "-", "!", "^", "*", "&", "<-"})
ASSIGN_OPS = frozenset(
    {"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", "&^="}
)


@dataclass
class SourceUnit:
    path: str
    text: str
    package_name: str = ""
    module_path: str = ""
    package_path: str = ""

    @property
    def import_path(self) -> str:
        """Import path of the unit's package (best effort)."""
        return self.package_path or self.module_path or self.package_name


class _Recover(Exception):
    pass


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.no_lit = 0  # >0 while parsing control clause headers

    # -- token helpers -----------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != EOF:
            self.pos += 1
        return t

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        t = tok or self.tok
        return ParseError(msg, t.line, t.col)

    def expect_op(self, value: str) -> Token:
        if not self.tok.is_op(value):
            raise self.error(f"expected {value!r}, found {self.tok.value!r}")
        return self.next()

    def expect_kw(self, value: str) -> Token:
        if not self.tok.is_kw(value):
            raise self.error(f"expected {value!r}, found {self.tok.value!r}")
        return self.next()

    def expect_ident(self) -> Token:
        if self.tok.kind != IDENT:
            raise self.error(f"expected identifier, found {self.tok.value!r}")
        return self.next()

    def skip_semis(self) -> None:
        while self.tok.is_op(";"):
            self.next()

    def expect_semi_or(self, *closers: str) -> None:
        if self.tok.is_op(";"):
            self.next()
        elif not (self.tok.kind == EOF or self.tok.is_op(*closers)):
            raise self.error(f"unexpected {self.tok.value!r}, expected end of statement")

    def node(self, kind: str, start: Token, **kw) -> AstNode:
        n = AstNode(kind, **kw)
        n.span = (start.line, start.col, start.line, start.col)
        return n

    def finish(self, n: AstNode) -> AstNode:
        prev = self.tokens[self.pos - 1] if self.pos > 0 else self.tok
        if prev.implicit and self.pos > 1:
            prev = self.tokens[self.pos - 2]
        end = (prev.end_line, prev.end_col)
        if end < (n.span[0], n.span[1]):
            end = (n.span[0], n.span[1])
        n.span = (n.span[0], n.span[1], end[0], end[1])
        return n

    # -- recovery ------------------------------------------------------------
    def opaque(self, start_pos: int, stop_at_brace: bool) -> AstNode:
        """Skip to the end of the current statement and wrap it as an opaque leaf."""
        self.pos = start_pos
        depth = 0
        openers, closers = "([{", ")]}"
        while True:
            t = self.tok
            if t.kind == EOF:
                if depth:
                    raise self.error("unbalanced brackets", self.tokens[start_pos])
                break
            if t.kind == OP and t.value in openers:
                depth += 1
            elif t.kind == OP and t.value in closers:
                if depth == 0:
                    if stop_at_brace:
                        break
                    raise self.error(f"unexpected {t.value!r}")
                depth -= 1
            elif t.is_op(";") and depth == 0:
                break
            self.next()
        toks = [t for t in self.tokens[start_pos:self.pos] if not t.implicit]
        if not toks:
            # nothing consumable; drop the offending token to guarantee progress
            bad = self.next()
            toks = [bad]
        first, last = toks[0], toks[-1]
        n = AstNode("expr-stmt", value=self.text[first.offset:last.end_offset])
        n.attrs["opaque"] = True
        n.span = (first.line, first.col, last.end_line, last.end_col)
        n.meta["tokens"] = toks
        return n

    # -- file level ----------------------------------------------------------
    def parse_file(self) -> AstNode:
        self.skip_semis()
        start = self.tok
        root = self.node("file", start)
        self.expect_kw("package")
        root.value = self.expect_ident().value
        self.expect_semi_or()
        while self.tok.kind != EOF:
            self.skip_semis()
            if self.tok.kind == EOF:
                break
            begin = self.pos
            try:
                decls = self.parse_top_decl()
                self.expect_semi_or()
                for d in decls:
                    root.add(d, "decl")
            except ParseError:
                if self.tokens[begin].is_op("}"):
                    raise
                root.add(self.opaque(begin, stop_at_brace=False), "decl")
        return self.finish(root)

    def parse_top_decl(self) -> list[AstNode]:
        t = self.tok
        if t.is_kw("import"):
            return self.parse_group("import", self.parse_import_spec)
        if t.is_kw("func"):
            return [self.parse_func_decl()]
        if t.is_kw("var", "const"):
            return self.parse_group(t.value, lambda: self.parse_value_spec("global-var-decl", t.value))
        if t.is_kw("type"):
            return self.parse_group("type", lambda: self.parse_type_spec("type-decl"))
        raise self.error(f"unexpected {t.value!r} at top level")

    def parse_group(self, kw: str, spec) -> list[AstNode]:
        kw_tok = self.expect_kw(kw)
        out = []
        if self.tok.is_op("("):
            self.next()
            self.skip_semis()
            while not self.tok.is_op(")"):
                out.append(spec())
                self.expect_semi_or(")")
                self.skip_semis()
            self.next()
            for n in out:
                n.attrs["grouped"] = True
        else:
            n = spec()
            # a lone spec spans its keyword too
            n.span = (kw_tok.line, kw_tok.col, n.span[2], n.span[3])
            out.append(n)
        return out

    def parse_import_spec(self) -> AstNode:
        start = self.tok
        n = self.node("import", start)
        if self.tok.kind == IDENT or self.tok.is_op("."):
            alias = self.next()
            n.add(AstNode("ident", value=alias.value, span=_tspan(alias)), "alias")
        if self.tok.kind != STRING:
            raise self.error("expected import path")
        path = self.next().value
        n.value = path[1:-1]
        return self.finish(n)

    def parse_value_spec(self, kind: str, keyword: str) -> AstNode:
        start = self.tok
        n = self.node(kind, start)
        n.attrs["keyword"] = keyword
        for name in self.parse_ident_list():
            n.add(name, "name")
        if not (self.tok.is_op("=", ";", ")") or self.tok.kind == EOF):
            n.add(self.parse_type(), "type")
        if self.tok.is_op("="):
            self.next()
            for v in self.parse_expr_list():
                n.add(v, "value")
        return self.finish(n)

    def parse_type_spec(self, kind: str) -> AstNode:
        start = self.tok
        n = self.node(kind, start)
        n.value = self.expect_ident().value
        if self.tok.is_op("["):
            # type parameters are outside the supported subset
            raise self.error("generic type declarations are not supported")
        if self.tok.is_op("="):
            self.next()
            n.attrs["alias"] = True
        n.add(self.parse_type(), "type")
        return self.finish(n)

    def parse_ident_list(self) -> list[AstNode]:
        out = []
        while True:
            t = self.expect_ident()
            out.append(AstNode("ident", value=t.value, span=_tspan(t)))
            if not self.tok.is_op(","):
                return out
            self.next()

    def parse_func_decl(self) -> AstNode:
        start = self.expect_kw("func")
        n = self.node("function-decl", start)
        if self.tok.is_op("("):
            for p in self.parse_params():
                n.add(p, "receiver")
        n.value = self.expect_ident().value
        if self.tok.is_op("["):
            raise self.error("generic functions are not supported")
        self.parse_signature_into(n)
        if self.tok.is_op("{"):
            n.add(self.parse_block(), "body")
        return self.finish(n)

    def parse_signature_into(self, n: AstNode) -> None:
        for p in self.parse_params():
            n.add(p, "param")
        if self.tok.is_op("("):
            for r in self.parse_params():
                n.add(r, "result")
        elif self._starts_type():
            t = self.parse_type()
            f = AstNode("field", span=t.span)
            f.add(t, "type")
            n.add(f, "result")

    def _starts_type(self) -> bool:
        t = self.tok
        return (
            t.kind == IDENT
            or t.is_op("*", "[", "(", "<-")
            or t.is_kw("map", "chan", "func", "struct", "interface")
        )

    def parse_params(self) -> list[AstNode]:
        self.expect_op("(")
        items: list[tuple[AstNode | None, AstNode | None, Token]] = []
        while not self.tok.is_op(")"):
            start = self.tok
            if self.tok.kind == IDENT and not self.peek().is_op(".", ",", ")"):
                # "name Type" or "name ...Type"
                name = self.next()
                typ = self.parse_param_type()
                items.append((AstNode("ident", value=name.value, span=_tspan(name)), typ, start))
            else:
                typ = self.parse_param_type()
                items.append((None, typ, start))
            if not self.tok.is_op(","):
                break
            self.next()
            self.skip_semis()
        self.expect_op(")")
        named = any(name is not None for name, _, _ in items)
        fields: list[AstNode] = []
        pending: list[tuple[AstNode, Token]] = []
        for name, typ, start in items:
            if named and name is None:
                # bare identifiers waiting for the type of a later named item
                if typ.kind != "type-name" or typ.attrs.get("qualifier"):
                    raise self.error("mixed named and unnamed parameters", start)
                pending.append((AstNode("ident", value=typ.value, span=typ.span), start))
                continue
            for pname, pstart in pending:
                f = AstNode("field", value=pname.value, span=pname.span)
                f.add(_clone(typ), "type")
                fields.append(f)
            pending = []
            f = AstNode("field", value=name.value if name else None)
            f.span = (start.line, start.col, typ.span[2], typ.span[3])
            f.add(typ, "type")
            fields.append(f)
        if pending:
            raise self.error("missing parameter type")
        return fields

    def parse_param_type(self) -> AstNode:
        if self.tok.is_op("..."):
            start = self.next()
            n = self.node("ellipsis-type", start)
            n.add(self.parse_type(), "elem")
            return self.finish(n)
        return self.parse_type()

    # -- types -----------------------------------------------------------------
    def parse_type(self) -> AstNode:
        t = self.tok
        if t.kind == IDENT:
            return self.parse_type_name()
        if t.is_op("("):
            self.next()
            inner = self.parse_type()
            self.expect_op(")")
            return inner
        if t.is_op("*"):
            self.next()
            n = self.node("pointer-type", t)
            n.add(self.parse_type(), "elem")
            return self.finish(n)
        if t.is_op("["):
            self.next()
            if self.tok.is_op("]"):
                self.next()
                n = self.node("slice-type", t)
            else:
                n = self.node("array-type", t)
                if self.tok.is_op("..."):
                    e = self.next()
                    n.add(AstNode("ellipsis-len", value="...", span=_tspan(e)), "len")
                else:
                    n.add(self.parse_expr(), "len")
                self.expect_op("]")
            n.add(self.parse_type(), "elem")
            return self.finish(n)
        if t.is_kw("map"):
            self.next()
            n = self.node("map-type", t)
            self.expect_op("[")
            n.add(self.parse_type(), "key")
            self.expect_op("]")
            n.add(self.parse_type(), "elem")
            return self.finish(n)
        if t.is_kw("chan") or t.is_op("<-"):
            n = self.node("chan-type", t)
            if t.is_op("<-"):
                self.next()
                self.expect_kw("chan")
                n.attrs["dir"] = "recv"
            else:
                self.next()
                if self.tok.is_op("<-"):
                    self.next()
                    n.attrs["dir"] = "send"
            n.add(self.parse_type(), "elem")
            return self.finish(n)
        if t.is_kw("func"):
            self.next()
            n = self.node("func-type", t)
            self.parse_signature_into(n)
            return self.finish(n)
        if t.is_kw("struct"):
            return self.parse_struct_type()
        if t.is_kw("interface"):
            return self.parse_interface_type()
        raise self.error(f"expected type, found {t.value!r}")

    def parse_type_name(self) -> AstNode:
        first = self.expect_ident()
        n = self.node("type-name", first)
        if self.tok.is_op(".") and self.peek().kind == IDENT:
            self.next()
            n.attrs["qualifier"] = first.value
            n.value = self.next().value
        else:
            n.value = first.value
        return self.finish(n)

    def parse_struct_type(self) -> AstNode:
        start = self.expect_kw("struct")
        n = self.node("struct-type", start)
        self.expect_op("{")
        self.skip_semis()
        while not self.tok.is_op("}"):
            if self.tok.is_op("*") or (
                self.tok.kind == IDENT and (self.peek().is_op(";", "}", ".") or self.peek().kind == STRING)
            ):
                typ = self.parse_type()
                f = AstNode("field", span=typ.span)
                f.attrs["embedded"] = True
                f.add(typ, "type")
                fields = [f]
            else:
                names = self.parse_ident_list()
                typ = self.parse_type()
                fields = []
                for i, nm in enumerate(names):
                    f = AstNode("field", value=nm.value)
                    f.span = (nm.span[0], nm.span[1], typ.span[2], typ.span[3])
                    f.add(typ if i == 0 else _clone(typ), "type")
                    fields.append(f)
            if self.tok.kind == STRING:
                tag = self.next().value
                for f in fields:
                    f.attrs["tag"] = tag
            for f in fields:
                n.add(f, "field")
            self.expect_semi_or("}")
            self.skip_semis()
        self.expect_op("}")
        return self.finish(n)

    def parse_interface_type(self) -> AstNode:
        start = self.expect_kw("interface")
        n = self.node("interface-type", start)
        self.expect_op("{")
        self.skip_semis()
        while not self.tok.is_op("}"):
            if self.tok.kind == IDENT and self.peek().is_op("("):
                mstart = self.tok
                m = self.node("method-spec", mstart)
                m.value = self.next().value
                self.parse_signature_into(m)
                n.add(self.finish(m), "method")
            else:
                n.add(self.parse_type(), "embed")
            self.expect_semi_or("}")
            self.skip_semis()
        self.expect_op("}")
        return self.finish(n)

    # -- statements --------------------------------------------------------
    def parse_block(self) -> AstNode:
        start = self.expect_op("{")
        n = self.node("block", start)
        saved, self.no_lit = self.no_lit, 0
        for s in self.parse_stmt_list():
            n.add(s, "stmt")
        self.no_lit = saved
        self.expect_op("}")
        return self.finish(n)

    def parse_stmt_list(self) -> list[AstNode]:
        out = []
        self.skip_semis()
        while not (self.tok.is_op("}") or self.tok.kind == EOF or self.tok.is_kw("case", "default")):
            begin = self.pos
            try:
                stmts = self.parse_stmt()
                self.expect_semi_or("}")
            except ParseError:
                if self.tokens[begin].is_op("}"):
                    raise
                stmts = [self.opaque(begin, stop_at_brace=True)]
                self.expect_semi_or("}")
            out.extend(stmts)
            self.skip_semis()
        return out

    def parse_stmt(self) -> list[AstNode]:
        t = self.tok
        if t.kind == KEYWORD:
            v = t.value
            if v in ("var", "const"):
                return self.parse_group(v, lambda: self.parse_value_spec("declaration", v))
            if v == "type":
                decls = self.parse_group("type", lambda: self.parse_type_spec("declaration"))
                for d in decls:
                    d.attrs["keyword"] = "type"
                return decls
            if v == "return":
                self.next()
                n = self.node("return", t)
                if not (self.tok.is_op(";", "}")):
                    for e in self.parse_expr_list():
                        n.add(e, "value")
                return [self.finish(n)]
            if v == "if":
                return [self.parse_if()]
            if v == "for":
                return [self.parse_for()]
            if v == "switch":
                return [self.parse_switch()]
            if v == "select":
                return [self.parse_select()]
            if v in ("go", "defer"):
                self.next()
                n = self.node(v, t)
                n.add(self.parse_expr(), "call")
                return [self.finish(n)]
            if v in ("break", "continue", "goto", "fallthrough"):
                self.next()
                n = self.node("branch", t, value=v)
                if v != "fallthrough" and self.tok.kind == IDENT:
                    lab = self.next()
                    n.attrs["label"] = lab.value
                return [self.finish(n)]
            if v not in ("func", "struct", "map", "chan", "interface"):
                raise self.error(f"unexpected keyword {v!r}")
        if t.is_op("{"):
            return [self.parse_block()]
        if t.kind == IDENT and self.peek().is_op(":"):
            self.next()
            self.next()
            n = self.node("labeled", t, value=t.value)
            self.skip_semis()
            if self.tok.is_op("}"):
                return [self.finish(n)]
            inner = self.parse_stmt()
            n.add(inner[0], "stmt")
            return [self.finish(n)] + inner[1:]
        return [self.parse_simple_stmt()]

    def parse_simple_stmt(self, allow_range: bool = False) -> AstNode:
        start = self.tok
        if allow_range and self.tok.is_kw("range"):
            self.next()
            n = self.node("range-clause", start)
            n.add(self.parse_expr(), "range")
            return self.finish(n)
        lhs = self.parse_expr_list()
        t = self.tok
        if t.is_op(":=") or (t.kind == OP and t.value in ASSIGN_OPS):
            self.next()
            if allow_range and self.tok.is_kw("range") and t.value in (":=", "="):
                self.next()
                n = self.node("range-clause", start, value=t.value)
                for e in lhs:
                    n.add(e, "lhs")
                n.add(self.parse_expr(), "range")
                return self.finish(n)
            kind = "short-var-decl" if t.value == ":=" else "assign"
            n = self.node(kind, start, value=t.value)
            for e in lhs:
                n.add(e, "lhs")
            for e in self.parse_expr_list():
                n.add(e, "rhs")
            return self.finish(n)
        if len(lhs) != 1:
            raise self.error("expected assignment after expression list")
        if t.is_op("++", "--"):
            self.next()
            n = self.node("incdec", start, value=t.value)
            n.add(lhs[0], "target")
            return self.finish(n)
        if t.is_op("<-"):
            self.next()
            n = self.node("send", start)
            n.add(lhs[0], "chan")
            n.add(self.parse_expr(), "value")
            return self.finish(n)
        n = self.node("expr-stmt", start)
        n.add(lhs[0], "expr")
        return self.finish(n)

    def _header(self, fn):
        self.no_lit += 1
        try:
            return fn()
        finally:
            self.no_lit -= 1

    def parse_if(self) -> AstNode:
        start = self.expect_kw("if")
        n = self.node("if", start)

        def header():
            init = None
            if not self.tok.is_op(";"):
                s = self.parse_simple_stmt()
            else:
                s = None
            if self.tok.is_op(";"):
                self.next()
                init = s
                cond = self.parse_expr()
            else:
                if s is None or s.kind != "expr-stmt":
                    raise self.error("missing condition in if statement")
                cond = s.children[0]
            return init, cond

        init, cond = self._header(header)
        n.add(init, "init")
        n.add(cond, "cond")
        n.add(self.parse_block(), "then")
        if self.tok.is_kw("else"):
            self.next()
            if self.tok.is_kw("if"):
                n.add(self.parse_if(), "else")
            else:
                n.add(self.parse_block(), "else")
        return self.finish(n)

    def parse_for(self) -> AstNode:
        start = self.expect_kw("for")
        n = self.node("for", start)

        def header():
            if self.tok.is_op("{"):
                return
            s = None
            if not self.tok.is_op(";"):
                s = self.parse_simple_stmt(allow_range=True)
            if s is not None and s.kind == "range-clause":
                n.attrs["range"] = True
                if s.value:
                    n.attrs["define"] = s.value == ":="
                for e in s.all("lhs"):
                    n.add(e, "key" if not n.all("key") else "value")
                n.add(s.child("range"), "range")
                return
            if self.tok.is_op(";"):
                self.next()
                n.add(s, "init")
                if not self.tok.is_op(";"):
                    n.add(self.parse_expr(), "cond")
                self.expect_op(";")
                if not self.tok.is_op("{"):
                    n.add(self.parse_simple_stmt(), "post")
                n.attrs["clauses"] = True
                return
            if s is None or s.kind != "expr-stmt":
                raise self.error("malformed for header")
            n.add(s.children[0], "cond")

        self._header(header)
        n.add(self.parse_block(), "body")
        return self.finish(n)

    def parse_switch(self) -> AstNode:
        start = self.expect_kw("switch")
        n = self.node("switch", start)

        def header():
            if self.tok.is_op("{"):
                return
            s1 = None if self.tok.is_op(";") else self.parse_simple_stmt()
            tag_stmt = s1
            if self.tok.is_op(";"):
                self.next()
                n.add(s1, "init")
                tag_stmt = None if self.tok.is_op("{") else self.parse_simple_stmt()
            if tag_stmt is None:
                return
            if tag_stmt.kind == "short-var-decl" and len(tag_stmt.children) == 2:
                guard = tag_stmt.all("rhs")[0]
                if guard.kind == "type-assert" and guard.attrs.get("type_switch"):
                    n.attrs["type_switch"] = True
                    n.add(tag_stmt.all("lhs")[0], "bind")
                    n.add(guard, "tag")
                    return
            if tag_stmt.kind != "expr-stmt":
                raise self.error("malformed switch header")
            tag = tag_stmt.children[0]
            if tag.kind == "type-assert" and tag.attrs.get("type_switch"):
                n.attrs["type_switch"] = True
            n.add(tag, "tag")

        self._header(header)
        self.expect_op("{")
        self.skip_semis()
        while not self.tok.is_op("}"):
            n.add(self.parse_case_clause(type_switch=n.attrs.get("type_switch", False)), "case")
        self.expect_op("}")
        return self.finish(n)

    def parse_case_clause(self, type_switch: bool = False, comm: bool = False) -> AstNode:
        start = self.tok
        c = self.node("case", start)
        if self.tok.is_kw("default"):
            self.next()
            c.attrs["default"] = True
        else:
            self.expect_kw("case")
            if comm:
                c.add(self.parse_simple_stmt(), "comm")
            else:
                for e in (self.parse_type_list() if type_switch else self.parse_expr_list()):
                    c.add(e, "expr")
        colon = self.expect_op(":")
        head_end = (colon.end_line, colon.end_col)
        for s in self.parse_stmt_list():
            c.add(s, "stmt")
        self.finish(c)
        c.meta["head_span"] = (c.span[0], c.span[1], head_end[0], head_end[1])
        return c

    def parse_type_list(self) -> list[AstNode]:
        out = []
        while True:
            if self.tok.kind == IDENT and self.tok.value == "nil":
                t = self.next()
                out.append(AstNode("ident", value="nil", span=_tspan(t)))
            else:
                out.append(self.parse_type())
            if not self.tok.is_op(","):
                return out
            self.next()

    def parse_select(self) -> AstNode:
        start = self.expect_kw("select")
        n = self.node("select", start)
        self.expect_op("{")
        self.skip_semis()
        while not self.tok.is_op("}"):
            n.add(self.parse_case_clause(comm=True), "case")
        self.expect_op("}")
        return self.finish(n)

    # -- expressions -------------------------------------------------------
    def parse_expr_list(self) -> list[AstNode]:
        out = [self.parse_expr()]
        while self.tok.is_op(","):
            self.next()
            out.append(self.parse_expr())
        return out

    def parse_expr(self, prec: int = 1) -> AstNode:
        left = self.parse_unary()
        while True:
            t = self.tok
            p = BINARY_PRECEDENCE.get(t.value) if t.kind == OP else None
            if p is None or p < prec:
                return left
            self.next()
            right = self.parse_expr(p + 1)
            n = AstNode("binary-op", value=t.value)
            n.add(left, "left")
            n.add(right, "right")
            n.span = (left.span[0], left.span[1], right.span[2], right.span[3])
            left = n

    def parse_unary(self) -> AstNode:
        t = self.tok
        if t.kind == OP and t.value in UNARY_OPS:
            self.next()
            if t.value == "<-" and self.tok.is_kw("chan"):
                # <-chan T in expression position
                self.pos -= 1
                return self.parse_primary()
            n = self.node("unary-op", t, value=t.value)
            n.add(self.parse_unary(), "operand")
            return self.finish(n)
        return self.parse_primary()

    def parse_operand(self) -> AstNode:
        t = self.tok
        if t.kind in (INT, FLOAT, IMAG, CHAR, STRING):
            self.next()
            n = AstNode("literal", value=t.value, span=_tspan(t))
            n.attrs["lit"] = t.kind
            return n
        if t.kind == IDENT:
            self.next()
            return AstNode("ident", value=t.value, span=_tspan(t))
        if t.is_op("("):
            self.next()
            saved, self.no_lit = self.no_lit, 0
            n = self.node("paren", t)
            n.add(self.parse_expr(), "expr")
            self.expect_op(")")
            self.no_lit = saved
            return self.finish(n)
        if t.is_kw("func"):
            self.next()
            ft = self.node("func-type", t)
            self.parse_signature_into(ft)
            self.finish(ft)
            if self.tok.is_op("{"):
                n = self.node("func-lit", t)
                n.add(ft, "type")
                saved, self.no_lit = self.no_lit, 0
                n.add(self.parse_block(), "body")
                self.no_lit = saved
                return self.finish(n)
            return ft
        if t.is_op("[", "<-") or t.is_kw("map", "chan", "struct", "interface"):
            return self.parse_type()
        raise self.error(f"unexpected {t.value!r} in expression")

    def parse_primary(self) -> AstNode:
        x = self.parse_operand()
        while True:
            t = self.tok
            if t.is_op("."):
                self.next()
                if self.tok.kind == IDENT:
                    f = self.next()
                    fid = AstNode("ident", value=f.value, span=_tspan(f))
                    if x.kind == "selector-chain":
                        x.add(fid, "field")
                        x.span = (x.span[0], x.span[1], fid.span[2], fid.span[3])
                    else:
                        chain = AstNode("selector-chain")
                        chain.add(x, "base")
                        chain.add(fid, "field")
                        chain.span = (x.span[0], x.span[1], fid.span[2], fid.span[3])
                        x = chain
                elif self.tok.is_op("("):
                    self.next()
                    n = AstNode("type-assert")
                    n.add(x, "base")
                    if self.tok.is_kw("type"):
                        self.next()
                        n.attrs["type_switch"] = True
                    else:
                        n.add(self.parse_type(), "type")
                    self.expect_op(")")
                    n.span = (x.span[0], x.span[1], 0, 0)
                    x = self.finish(n)
                else:
                    raise self.error("expected selector or type assertion")
            elif t.is_op("["):
                self.next()
                saved, self.no_lit = self.no_lit, 0
                x = self.parse_index_or_slice(x)
                self.no_lit = saved
            elif t.is_op("("):
                self.next()
                saved, self.no_lit = self.no_lit, 0
                n = AstNode("call")
                n.add(x, "callee")
                self.skip_semis_in_parens()
                while not self.tok.is_op(")"):
                    n.add(self.parse_expr(), "arg")
                    if self.tok.is_op("..."):
                        self.next()
                        n.attrs["ellipsis"] = True
                    if not self.tok.is_op(","):
                        break
                    self.next()
                    self.skip_semis_in_parens()
                self.expect_op(")")
                self.no_lit = saved
                n.span = (x.span[0], x.span[1], 0, 0)
                x = self.finish(n)
            elif t.is_op("{") and self._may_be_literal_type(x):
                x = self.parse_composite_literal(x)
            else:
                return x

    def skip_semis_in_parens(self) -> None:
        while self.tok.is_op(";") and self.tok.implicit:
            self.next()

    def _may_be_literal_type(self, x: AstNode) -> bool:
        if x.kind in ("slice-type", "array-type", "map-type", "struct-type"):
            return True
        if self.no_lit:
            return False
        if x.kind == "ident":
            return True
        if x.kind == "selector-chain":
            base = x.child("base")
            return base.kind == "ident" and len(x.all("field")) == 1
        return False

    def parse_index_or_slice(self, x: AstNode) -> AstNode:
        parts: list[AstNode | None] = [None]
        colons = 0
        if not self.tok.is_op(":"):
            parts[0] = self.parse_expr()
        while self.tok.is_op(":"):
            self.next()
            colons += 1
            if self.tok.is_op(":", "]"):
                parts.append(None)
            else:
                parts.append(self.parse_expr())
        self.expect_op("]")
        if colons == 0:
            n = AstNode("index")
            n.add(x, "base")
            n.add(parts[0], "index")
        else:
            n = AstNode("slice-expr")
            n.add(x, "base")
            for role, p in zip(("lo", "hi", "max"), parts):
                n.add(p, role)
            n.attrs["three"] = colons == 2
        n.span = (x.span[0], x.span[1], 0, 0)
        return self.finish(n)

    def parse_composite_literal(self, typ: AstNode | None) -> AstNode:
        start = self.expect_op("{")
        n = AstNode("composite-literal")
        if typ is not None:
            n.add(typ, "type")
            n.span = (typ.span[0], typ.span[1], 0, 0)
        else:
            n.span = (start.line, start.col, 0, 0)
        saved, self.no_lit = self.no_lit, 0
        self.skip_semis_in_parens()
        while not self.tok.is_op("}"):
            el_start = self.tok
            e = self.node("element", el_start)
            v = self.parse_element_value()
            if self.tok.is_op(":"):
                self.next()
                e.add(v, "key")
                v = self.parse_element_value()
            e.add(v, "value")
            n.add(self.finish(e), "elem")
            if not self.tok.is_op(","):
                break
            self.next()
            self.skip_semis_in_parens()
        self.skip_semis_in_parens()
        self.expect_op("}")
        self.no_lit = saved
        return self.finish(n)

    def parse_element_value(self) -> AstNode:
        if self.tok.is_op("{"):
            return self.parse_composite_literal(None)
        return self.parse_expr()


def _tspan(t: Token) -> tuple[int, int, int, int]:
    return (t.line, t.col, t.end_line, t.end_col)


def _clone(n: AstNode) -> AstNode:
    c = AstNode(
        n.kind, [], n.span, n.value, n.role, dict(n.attrs), n.resolved_type, n.resolved_package
    )
    c.children = [_clone(ch) for ch in n.children]
    return c


def parse_source(unit: SourceUnit) -> AstNode:
    """Parse ``unit.text`` into a ``file`` node and resolve names and types.

    Sets ``unit.package_name`` from the package clause.
    """
    from gounsafe.frontend.resolve import resolve_file

    if not unit.text.strip():
        raise ParseError("empty source", 1, 1)
    root = Parser(unit.text).parse_file()
    unit.package_name = root.value or ""
    resolve_file(root, unit)
    return root
