"""Go source front end: lexer, parser, resolver and usage finder."""
from gounsafe.frontend.ast import AstNode, isomorphic
from gounsafe.frontend.parser import SourceUnit, parse_source
from gounsafe.frontend.printer import format_source
from gounsafe.frontend.usages import (
    ContextRef, UnsafeUsageSite, find_unsafe_usages, resolve_usage_context,
)

__all__ = [
    "AstNode", "ContextRef", "SourceUnit", "UnsafeUsageSite", "find_unsafe_usages",
    "format_source", "isomorphic", "parse_source", "resolve_usage_context",
]
