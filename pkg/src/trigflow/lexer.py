"""Tokenizer for ``.diva`` workflow scripts."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import LexError

KEYWORDS = frozenset({"Trigger", "and", "or", "not", "true", "false"})

# Longest operators first.
OPERATORS = ("&&", "||", "<=", ">=", "==", "!=", "+", "-", "*", "/", "%", "<", ">", "!", "=")
PUNCT = "(){},.;"

_NUMBER = re.compile(r"(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | real | str | op | punct | keyword | newline
    lexeme: str
    line: int
    col: int

    def __repr__(self):
        return f"Token({self.kind} {self.lexeme!r} @{self.line}:{self.col})"


def tokenize(source: str) -> list[Token]:
    """Split ``source`` into tokens.

    Comments are dropped. Each run of line breaks outside comments yields a
    single ``newline`` token, which the parser treats as a statement
    separator.
    """
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)

    def advance(text: str) -> None:
        nonlocal line, col
        for ch in text:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1

    while i < n:
        ch = source[i]
        if ch == "\n":
            if not tokens or tokens[-1].kind != "newline":
                tokens.append(Token("newline", "\n", line, col))
            advance(ch)
            i += 1
        elif ch in " \t\r":
            advance(ch)
            i += 1
        elif source.startswith("//", i):
            end = source.find("\n", i)
            end = n if end < 0 else end
            advance(source[i:end])
            i = end
        elif source.startswith("/*", i):
            end = source.find("*/", i + 2)
            if end < 0:
                raise LexError("unterminated comment", line, col)
            advance(source[i:end + 2])
            i = end + 2
        elif ch == '"':
            start_line, start_col = line, col
            j = i + 1
            while j < n and source[j] != '"':
                if source[j] == "\n":
                    raise LexError("unterminated string", start_line, start_col)
                if source[j] == "\\":
                    if j + 1 >= n or source[j + 1] not in _ESCAPES:
                        raise LexError("invalid escape in string", start_line, start_col)
                    j += 1
                j += 1
            if j >= n:
                raise LexError("unterminated string", start_line, start_col)
            lexeme = source[i:j + 1]
            tokens.append(Token("str", lexeme, start_line, start_col))
            advance(lexeme)
            i = j + 1
        elif ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUMBER.match(source, i)
            lexeme = m.group(0)
            kind = "real" if ("." in lexeme or m.group(2)) else "int"
            tokens.append(Token(kind, lexeme, line, col))
            advance(lexeme)
            i = m.end()
        elif ch.isalpha() or ch == "_":
            lexeme = _IDENT.match(source, i).group(0)
            kind = "keyword" if lexeme in KEYWORDS else "ident"
            tokens.append(Token(kind, lexeme, line, col))
            advance(lexeme)
            i += len(lexeme)
        else:
            for op in OPERATORS:
                if source.startswith(op, i):
                    tokens.append(Token("op", op, line, col))
                    advance(op)
                    i += len(op)
                    break
            else:
                if ch in PUNCT:
                    tokens.append(Token("punct", ch, line, col))
                    advance(ch)
                    i += 1
                else:
                    raise LexError(f"illegal character {ch!r}", line, col)
    return tokens


def string_value(lexeme: str) -> str:
    """Decode a string literal's lexeme (quotes included)."""
    out = []
    body = lexeme[1:-1]
    j = 0
    while j < len(body):
        if body[j] == "\\":
            out.append(_ESCAPES[body[j + 1]])
            j += 2
        else:
            out.append(body[j])
            j += 1
    return "".join(out)
