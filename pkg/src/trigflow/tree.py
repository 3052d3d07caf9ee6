"""Abstract syntax tree for workflow scripts, plus a canonical printer."""

from __future__ import annotations

from dataclasses import dataclass, field

from .values import BoolV, IntV, RealV, StrV, Value

BINARY_OPS = ("||", "&&", "<", "<=", ">", ">=", "==", "!=", "+", "-", "*", "/", "%")
UNARY_OPS = ("-", "!")


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True, eq=False)
class Literal(Expr):
    value: Value
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    def __eq__(self, other):
        return (isinstance(other, Literal) and type(self.value) is type(other.value)
                and self.value == other.value)

    def __hash__(self):
        return hash(repr(self.value))


@dataclass(frozen=True)
class Ref(Expr):
    name: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Member(Expr):
    base: Expr
    field: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call(Expr):
    callee: str
    positional: tuple[Expr, ...] = ()
    named: tuple[tuple[str, Expr], ...] = ()
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    lhs: Expr
    rhs: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Assign:
    targets: tuple[str, ...]
    exprs: tuple[Expr, ...]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class TriggerBlock:
    predicate: Expr
    body: tuple[Call, ...]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class WorkflowAst:
    statements: tuple[Assign | TriggerBlock, ...] = ()


def _literal_text(v: Value) -> str:
    if isinstance(v, BoolV):
        return "true" if v.b else "false"
    if isinstance(v, IntV):
        return str(v.i)
    if isinstance(v, RealV):
        text = repr(v.r)
        return text if ("." in text or "e" in text or "n" in text) else text + ".0"
    if isinstance(v, StrV):
        escaped = v.s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
        return f'"{escaped}"'
    raise ValueError(f"no literal syntax for {v!r}")


def unparse_expr(e: Expr) -> str:
    if isinstance(e, Literal):
        text = _literal_text(e.value)
        # negative numbers print as a unary minus applied to a literal
        return f"({text})" if text.startswith("-") else text
    if isinstance(e, Ref):
        return e.name
    if isinstance(e, Member):
        return f"{unparse_expr(e.base)}.{e.field}"
    if isinstance(e, Call):
        args = [unparse_expr(a) for a in e.positional]
        args += [f"{k} = {unparse_expr(v)}" for k, v in e.named]
        return f"{e.callee}({', '.join(args)})"
    if isinstance(e, Unary):
        return f"{e.op}({unparse_expr(e.operand)})"
    if isinstance(e, Binary):
        return f"({unparse_expr(e.lhs)} {e.op} {unparse_expr(e.rhs)})"
    raise TypeError(f"unknown expression {e!r}")


def unparse(ast: WorkflowAst) -> str:
    """Print ``ast`` back to source; fully parenthesised, so it reparses identically."""
    lines = []
    for st in ast.statements:
        if isinstance(st, Assign):
            lines.append(f"{', '.join(st.targets)} = {', '.join(unparse_expr(e) for e in st.exprs)}")
        else:
            body = "\n".join("    " + unparse_expr(c) for c in st.body)
            lines.append(f"Trigger({unparse_expr(st.predicate)}) {{\n{body}\n}}")
    return "\n".join(lines) + ("\n" if lines else "")
