"""Syntax tree node shared by the parser, printer and CFG builder."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator

Span = tuple[int, int, int, int]  # start line, start col, end line, end col (exclusive)

STATEMENT_KINDS = frozenset(
    {
        "declaration", "if", "for", "switch", "select", "return", "assign",
        "short-var-decl", "expr-stmt", "incdec", "send", "go", "defer", "branch",
        "labeled", "block",
    }
)
TYPE_KINDS = frozenset(
    {
        "type-name", "pointer-type", "slice-type", "array-type", "map-type",
        "chan-type", "func-type", "struct-type", "interface-type", "ellipsis-type",
    }
)
CONTEXT_KINDS = frozenset({"function-decl", "type-decl", "global-var-decl"})


@dataclass(eq=False)
class AstNode:
    kind: str
    children: list[AstNode] = field(default_factory=list)
    span: Span = (0, 0, 0, 0)
    value: str | None = None
    role: str = ""
    attrs: dict[str, Any] = field(default_factory=dict)
    resolved_type: str | None = None
    resolved_package: str | None = None
    # cached analysis results; not part of the tree's identity
    meta: dict[str, Any] = field(default_factory=dict, repr=False)

    def add(self, node: AstNode | None, role: str) -> AstNode | None:
        if node is not None:
            node.role = role
            self.children.append(node)
        return node

    def child(self, role: str) -> AstNode | None:
        for c in self.children:
            if c.role == role:
                return c
        return None

    def all(self, role: str) -> list[AstNode]:
        return [c for c in self.children if c.role == role]

    def walk(self) -> Iterator[AstNode]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def contains(self, line: int, col: int) -> bool:
        sl, sc, el, ec = self.span
        return (sl, sc) <= (line, col) < (el, ec)

    @property
    def start(self) -> tuple[int, int]:
        return self.span[0], self.span[1]

    def signature(self) -> tuple:
        """Structural identity used to compare trees for isomorphism."""
        attrs = tuple(sorted((k, repr(v)) for k, v in self.attrs.items()))
        return (
            self.kind, self.value, self.role, attrs, self.resolved_type,
            self.resolved_package, tuple(c.signature() for c in self.children),
        )

    def __repr__(self) -> str:
        v = f" {self.value!r}" if self.value is not None else ""
        return f"<{self.kind}{v} @{self.span[0]}:{self.span[1]}>"


def isomorphic(a: AstNode, b: AstNode) -> bool:
    return a.signature() == b.signature()
