"""Recursive-descent parser producing a :class:`WorkflowAst`.

Precedence, lowest to highest: ``||``, ``&&``, comparisons, additive,
multiplicative, unary, postfix (member access). All binary levels are
left-associative. Calls take ``(...)`` or ``{...}`` interchangeably.
"""

from __future__ import annotations

from typing import Iterable

from .errors import ParseError
from .lexer import Token, string_value, tokenize
from .tree import Assign, Binary, Call, Expr, Literal, Member, Ref, TriggerBlock, Unary, WorkflowAst
from .values import BoolV, IntV, RealV, StrV

RESERVED = frozenset({"Trigger", "time", "data"})

_LEVELS = (
    ("||",),
    ("&&",),
    ("<", "<=", ">", ">=", "==", "!="),
    ("+", "-"),
    ("*", "/", "%"),
)
_KEYWORD_OPS = {"or": "||", "and": "&&"}
_CLOSERS = {"(": ")", "{": "}"}


def parse_source(source: str, reserved: Iterable[str] | None = None) -> WorkflowAst:
    return parse_workflow(tokenize(source), reserved)


def parse_workflow(tokens: list[Token], reserved: Iterable[str] | None = None) -> WorkflowAst:
    """Parse a token stream.

    ``reserved`` names (registered operators) may not be assignment targets;
    by default the builtin operator names are used.
    """
    if reserved is None:
        from .ops import default_registry
        reserved = default_registry().names()
    return _Parser(tokens, RESERVED | frozenset(reserved)).workflow()


class _Parser:
    def __init__(self, tokens: list[Token], reserved: frozenset[str]):
        self.toks = tokens
        self.pos = 0
        self.reserved = reserved
        self.defined: set[str] = set()
        # newlines are insignificant inside (...) argument lists
        self.paren_depth = 0

    # --- token helpers -----------------------------------------------------

    def peek(self, offset: int = 0) -> Token | None:
        i = self.pos + offset
        if self.paren_depth:
            # skip newlines when looking ahead inside parentheses
            k = self.pos
            seen = -1
            while k < len(self.toks):
                if self.toks[k].kind != "newline":
                    seen += 1
                    if seen == offset:
                        return self.toks[k]
                k += 1
            return None
        return self.toks[i] if i < len(self.toks) else None

    def next(self) -> Token:
        if self.paren_depth:
            while self.pos < len(self.toks) and self.toks[self.pos].kind == "newline":
                self.pos += 1
        tok = self.peek()
        if tok is None:
            self.fail("unexpected end of input")
        self.pos += 1
        return tok

    def at(self, kind: str, lexeme: str | None = None, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.kind == kind and (lexeme is None or tok.lexeme == lexeme)

    def expect(self, kind: str, lexeme: str | None = None) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind or (lexeme is not None and tok.lexeme != lexeme):
            want = repr(lexeme) if lexeme else kind
            self.fail(f"expected {want}", want, tok)
        return self.next()

    def fail(self, message: str, expected: str | None = None, tok: Token | None = None):
        tok = tok or self.peek()
        if tok is None:
            # point just past the last real token, not at a trailing newline
            last = next((t for t in reversed(self.toks) if t.kind != "newline"), None)
            line, col = (last.line, last.col + len(last.lexeme)) if last else (1, 1)
            raise ParseError(f"{message} at end of input", line, col, expected)
        shown = "newline" if tok.kind == "newline" else repr(tok.lexeme)
        raise ParseError(f"{message}, found {shown}", tok.line, tok.col, expected)

    def skip_separators(self) -> None:
        while self.at("newline") or self.at("punct", ";"):
            self.pos += 1

    # --- statements ----------------------------------------------------------

    def workflow(self) -> WorkflowAst:
        statements = []
        self.skip_separators()
        while self.peek() is not None:
            statements.append(self.statement())
            if self.peek() is not None and not (self.at("newline") or self.at("punct", ";")):
                self.fail("expected end of statement", "newline")
            self.skip_separators()
        return WorkflowAst(tuple(statements))

    def statement(self):
        if self.at("keyword", "Trigger"):
            return self.trigger()
        return self.assign()

    def assign(self) -> Assign:
        first = self.expect("ident")
        targets = [first]
        while self.at("punct", ","):
            self.next()
            targets.append(self.expect("ident"))
        self.expect("op", "=")
        names = []
        for tok in targets:
            if tok.lexeme in self.reserved:
                raise ParseError(f"{tok.lexeme!r} is reserved and cannot be assigned", tok.line, tok.col)
            if tok.lexeme in self.defined or tok.lexeme in names:
                raise ParseError(f"{tok.lexeme!r} is already defined (signals are single-assignment)",
                                 tok.line, tok.col)
            names.append(tok.lexeme)
        exprs = [self.expr()]
        while self.at("punct", ","):
            self.next()
            exprs.append(self.expr())
        if len(exprs) != len(names):
            raise ParseError(f"{len(names)} targets but {len(exprs)} expressions", first.line, first.col)
        self.defined.update(names)
        return Assign(tuple(names), tuple(exprs), first.line, first.col)

    def trigger(self) -> TriggerBlock:
        kw = self.expect("keyword", "Trigger")
        self.expect("punct", "(")
        self.paren_depth += 1
        predicate = self.expr()
        self.expect("punct", ")")
        self.paren_depth -= 1
        self.expect("punct", "{")
        body = []
        self.skip_separators()
        while not self.at("punct", "}"):
            if self.peek() is None:
                self.fail("unterminated Trigger block", "'}'")
            call = self.postfix()
            if not isinstance(call, Call):
                self.fail("Trigger body may only contain action calls", "call")
            body.append(call)
            if not self.at("punct", "}"):
                if not (self.at("newline") or self.at("punct", ";")):
                    self.fail("expected separator between actions", "newline")
                self.skip_separators()
        close = self.expect("punct", "}")
        if not body:
            raise ParseError("Trigger block has an empty body", close.line, close.col, "call")
        return TriggerBlock(predicate, tuple(body), kw.line, kw.col)

    # --- expressions ------------------------------------------------------------

    def expr(self) -> Expr:
        return self.binary(0)

    def _binary_op(self, level: int) -> str | None:
        tok = self.peek()
        if tok is None:
            return None
        if tok.kind == "op" and tok.lexeme in _LEVELS[level]:
            return tok.lexeme
        if tok.kind == "keyword" and _KEYWORD_OPS.get(tok.lexeme) in _LEVELS[level]:
            return _KEYWORD_OPS[tok.lexeme]
        return None

    def binary(self, level: int) -> Expr:
        if level == len(_LEVELS):
            return self.unary()
        lhs = self.binary(level + 1)
        while (op := self._binary_op(level)) is not None:
            tok = self.next()
            rhs = self.binary(level + 1)
            lhs = Binary(op, lhs, rhs, tok.line, tok.col)
        return lhs

    def unary(self) -> Expr:
        if self.at("op", "-") or self.at("op", "!") or self.at("keyword", "not"):
            tok = self.next()
            op = "!" if tok.lexeme in ("!", "not") else "-"
            return Unary(op, self.unary(), tok.line, tok.col)
        return self.postfix()

    def postfix(self) -> Expr:
        e = self.primary()
        while self.at("punct", "."):
            self.next()
            name = self.expect("ident")
            e = Member(e, name.lexeme, name.line, name.col)
        return e

    def primary(self) -> Expr:
        tok = self.peek()
        if tok is None:
            self.fail("expected an expression", "expression")
        if tok.kind == "int":
            self.next()
            return Literal(IntV(int(tok.lexeme)), tok.line, tok.col)
        if tok.kind == "real":
            self.next()
            return Literal(RealV(float(tok.lexeme)), tok.line, tok.col)
        if tok.kind == "str":
            self.next()
            return Literal(StrV(string_value(tok.lexeme)), tok.line, tok.col)
        if tok.kind == "keyword" and tok.lexeme in ("true", "false"):
            self.next()
            return Literal(BoolV(tok.lexeme == "true"), tok.line, tok.col)
        if tok.kind == "ident":
            self.next()
            if self.at("punct", "(") or self.at("punct", "{"):
                return self.call(tok)
            return Ref(tok.lexeme, tok.line, tok.col)
        if tok.kind == "punct" and tok.lexeme == "(":
            self.next()
            self.paren_depth += 1
            e = self.expr()
            self.expect("punct", ")")
            self.paren_depth -= 1
            return e
        self.fail("expected an expression", "expression", tok)

    def call(self, name: Token) -> Call:
        opener = self.next().lexeme
        closer = _CLOSERS[opener]
        self.paren_depth += 1
        positional: list[Expr] = []
        named: list[tuple[str, Expr]] = []
        if not self.at("punct", closer):
            while True:
                if self.at("ident") and self.at("op", "=", offset=1):
                    key = self.next()
                    self.next()
                    if any(k == key.lexeme for k, _ in named):
                        raise ParseError(f"duplicate named argument {key.lexeme!r}", key.line, key.col)
                    named.append((key.lexeme, self.expr()))
                else:
                    if named:
                        self.fail("positional argument after named argument", "named argument")
                    positional.append(self.expr())
                if not self.at("punct", ","):
                    break
                self.next()
        self.expect("punct", closer)
        self.paren_depth -= 1
        return Call(name.lexeme, tuple(positional), tuple(named), name.line, name.col)
