"""Tokenizer for Go source with automatic semicolon insertion."""
from __future__ import annotations

from dataclasses import dataclass

from gounsafe.errors import ParseError

KEYWORDS = frozenset(
    {
        "break", "case", "chan", "const", "continue", "default", "defer", "else",
        "fallthrough", "for", "func", "go", "goto", "if", "import", "interface",
        "map", "package", "range", "return", "select", "struct", "switch", "type",
        "var",
    }
)

# longest first so that greedy matching works
OPERATORS = sorted(
    [
        "+", "-", "*", "/", "%", "&", "|", "^", "<<", ">>", "&^",
        "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", "&^=",
        "&&", "||", "<-", "++", "--", "==", "<", ">", "=", "!", "~",
        "!=", "<=", ">=", ":=", "...", "(", "[", "{", ",", ".", ")", "]", "}",
        ";", ":",
    ],
    key=len,
    reverse=True,
)

IDENT, INT, FLOAT, IMAG, CHAR, STRING, OP, KEYWORD, EOF = (
    "IDENT", "INT", "FLOAT", "IMAG", "CHAR", "STRING", "OP", "KEYWORD", "EOF",
)

_SEMI_TRIGGER_KW = frozenset({"break", "continue", "fallthrough", "return"})
_SEMI_TRIGGER_OP = frozenset({"++", "--", ")", "]", "}"})


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    col: int
    end_line: int
    end_col: int
    offset: int = 0
    end_offset: int = 0
    implicit: bool = False  # auto-inserted semicolon

    def is_op(self, *values: str) -> bool:
        return self.kind == OP and self.value in values

    def is_kw(self, *values: str) -> bool:
        return self.kind == KEYWORD and self.value in values


def _triggers_semicolon(tok: Token) -> bool:
    if tok.kind in (IDENT, INT, FLOAT, IMAG, CHAR, STRING):
        return True
    if tok.kind == KEYWORD:
        return tok.value in _SEMI_TRIGGER_KW
    return tok.kind == OP and tok.value in _SEMI_TRIGGER_OP


def _is_letter(ch: str) -> bool:
    return ch == "_" or ch.isalpha()


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def peek(self, k: int = 0) -> str:
        i = self.pos + k
        return self.text[i] if i < len(self.text) else ""

    def advance(self, n: int = 1) -> str:
        out = self.text[self.pos:self.pos + n]
        for ch in out:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n
        return out

    def error(self, msg: str) -> ParseError:
        return ParseError(msg, self.line, self.col)


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into tokens, inserting semicolons per the Go rules.

    Raises ``ParseError`` on characters or literals that cannot start a token.
    """
    sc = _Scanner(text)
    tokens: list[Token] = []

    def emit_semi_if_needed(line: int, col: int, offset: int) -> None:
        if tokens and _triggers_semicolon(tokens[-1]):
            tokens.append(Token(OP, ";", line, col, line, col, offset, offset, implicit=True))

    while True:
        ch = sc.peek()
        if ch == "":
            emit_semi_if_needed(sc.line, sc.col, sc.pos)
            tokens.append(Token(EOF, "", sc.line, sc.col, sc.line, sc.col, sc.pos, sc.pos))
            return tokens
        if ch == "\n":
            emit_semi_if_needed(sc.line, sc.col, sc.pos)
            sc.advance()
            continue
        if ch in " \t\r﻿":
            sc.advance()
            continue
        if ch == "/" and sc.peek(1) == "/":
            while sc.peek() not in ("", "\n"):
                sc.advance()
            continue
        if ch == "/" and sc.peek(1) == "*":
            line, col, off = sc.line, sc.col, sc.pos
            sc.advance(2)
            had_newline = False
            while not (sc.peek() == "*" and sc.peek(1) == "/"):
                if sc.peek() == "":
                    raise ParseError("unterminated block comment", line, col)
                if sc.peek() == "\n":
                    had_newline = True
                sc.advance()
            sc.advance(2)
            if had_newline:
                emit_semi_if_needed(line, col, off)
            continue

        line, col, start = sc.line, sc.col, sc.pos
        if _is_letter(ch):
            while _is_letter(sc.peek()) or sc.peek().isdigit():
                sc.advance()
            word = text[start:sc.pos]
            kind = KEYWORD if word in KEYWORDS else IDENT
        elif ch.isdigit() or (ch == "." and sc.peek(1).isdigit()):
            kind = _scan_number(sc)
        elif ch == '"':
            sc.advance()
            while sc.peek() != '"':
                c = sc.peek()
                if c in ("", "\n"):
                    raise ParseError("unterminated string literal", line, col)
                sc.advance(2 if c == "\\" else 1)
            sc.advance()
            kind = STRING
        elif ch == "`":
            sc.advance()
            while sc.peek() != "`":
                if sc.peek() == "":
                    raise ParseError("unterminated raw string literal", line, col)
                sc.advance()
            sc.advance()
            kind = STRING
        elif ch == "'":
            sc.advance()
            n = 0
            while sc.peek() != "'":
                c = sc.peek()
                if c in ("", "\n"):
                    raise ParseError("unterminated rune literal", line, col)
                sc.advance(2 if c == "\\" else 1)
                n += 1
            if n == 0:
                raise ParseError("empty rune literal", line, col)
            sc.advance()
            kind = CHAR
        else:
            for op in OPERATORS:
                if text.startswith(op, sc.pos):
                    sc.advance(len(op))
                    kind = OP
                    break
            else:
                raise sc.error(f"unexpected character {ch!r}")
        tokens.append(Token(kind, text[start:sc.pos], line, col, sc.line, sc.col, start, sc.pos))


def _scan_number(sc: _Scanner) -> str:
    kind = INT
    if sc.peek() == "0" and sc.peek(1) in "xXbBoO" and sc.peek(1):
        sc.advance(2)
        while sc.peek().isalnum() or sc.peek() == "_":
            sc.advance()
        # hex floats (0x1p-2) are rare; treat p exponents loosely
        if sc.peek() in "+-" and sc.text[sc.pos - 1] in "pP":
            sc.advance()
            while sc.peek().isdigit():
                sc.advance()
            kind = FLOAT
    else:
        while sc.peek().isdigit() or sc.peek() == "_":
            sc.advance()
        if sc.peek() == "." and sc.peek(1) != ".":
            kind = FLOAT
            sc.advance()
            while sc.peek().isdigit() or sc.peek() == "_":
                sc.advance()
        if sc.peek() in ("e", "E") and sc.peek():
            kind = FLOAT
            sc.advance()
            if sc.peek() in ("+", "-") and sc.peek():
                sc.advance()
            if not sc.peek().isdigit():
                raise sc.error("malformed exponent")
            while sc.peek().isdigit():
                sc.advance()
    if sc.peek() == "i":
        sc.advance()
        kind = IMAG
    if _is_letter(sc.peek()):
        raise sc.error("malformed number literal")
    return kind
