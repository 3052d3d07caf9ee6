"""Arithmetic, comparison, boolean and string operators (all pure)."""

from __future__ import annotations

import operator

from ..errors import DivisionByZero, TypeMismatch
from ..values import (ANY, BOOL, INT, NUM, REAL, STR, ArrayV, BoolV, FieldV, IntV, RealV, StrV,
                      Value, as_bool, as_float, promote_numeric, value_eq)
from .registry import Param, op

# DSL operator symbol -> registry name
BINARY = {"+": "add", "-": "sub", "*": "mul", "/": "div", "%": "mod",
          "<": "lt", "<=": "le", ">": "gt", ">=": "ge", "==": "eq", "!=": "ne",
          "&&": "and", "||": "or"}
UNARY = {"-": "neg", "!": "not"}

_NUMERIC = (INT, REAL)
_XY = (Param("x"), Param("y"))


def _numeric_result(ts, _const):
    if any(t == ANY for t in ts):
        return ANY if all(t in _NUMERIC + (ANY,) for t in ts) else None
    if all(t in _NUMERIC for t in ts):
        return INT if all(t == INT for t in ts) else REAL
    return None


def _add_result(ts, const):
    if all(t in (STR, ANY) for t in ts) and STR in ts:
        return STR
    return _numeric_result(ts, const)


def _arith(fn, a: Value, b: Value) -> Value:
    a, b = promote_numeric(a, b)
    if isinstance(a, IntV):
        return IntV(fn(a.i, b.i))
    return RealV(fn(a.r, b.r))


@op("add", params=_XY, out=_add_result)
def add(ctx, a, b):
    if isinstance(a, StrV) and isinstance(b, StrV):
        return StrV(a.s + b.s)
    return _arith(operator.add, a, b)


@op("sub", params=_XY, out=_numeric_result)
def sub(ctx, a, b):
    return _arith(operator.sub, a, b)


@op("mul", params=_XY, out=_numeric_result)
def mul(ctx, a, b):
    return _arith(operator.mul, a, b)


@op("div", params=(Param("x", NUM), Param("y", NUM)), out=REAL)
def div(ctx, a, b):
    """True division; always real."""
    d = as_float(b)
    if d == 0.0:
        raise DivisionByZero(f"{ctx.node}: division by zero")
    return RealV(as_float(a) / d)


@op("mod", params=(Param("x", INT), Param("y", INT)), out=INT)
def mod(ctx, a, b):
    """Integer modulo; the result takes the sign of the divisor."""
    if not (isinstance(a, IntV) and isinstance(b, IntV)):
        raise TypeMismatch("% needs integer operands")
    if b.i == 0:
        raise DivisionByZero(f"{ctx.node}: modulo by zero")
    return IntV(a.i % b.i)


def _compare(fn):
    def body(ctx, a, b):
        a, b = promote_numeric(a, b)
        x, y = (a.i, b.i) if isinstance(a, IntV) else (a.r, b.r)
        return BoolV(fn(x, y))
    return body


for _name, _fn in (("lt", operator.lt), ("le", operator.le), ("gt", operator.gt), ("ge", operator.ge)):
    op(_name, params=(Param("x", NUM), Param("y", NUM)), out=BOOL)(_compare(_fn))


def _eq_result(ts, _const):
    a, b = ts
    if ANY in ts or a == b or (a in _NUMERIC and b in _NUMERIC):
        return BOOL
    return None


@op("eq", params=_XY, out=_eq_result)
def eq(ctx, a, b):
    return BoolV(value_eq(a, b))


@op("ne", params=_XY, out=_eq_result)
def ne(ctx, a, b):
    return BoolV(not value_eq(a, b))


# Short-circuiting is done by the engine; these bodies only run when both
# operands were evaluated.
@op("and", params=(Param("x", BOOL), Param("y", BOOL)), out=BOOL, short_circuit="and")
def and_(ctx, a, b):
    return BoolV(as_bool(a) and as_bool(b))


@op("or", params=(Param("x", BOOL), Param("y", BOOL)), out=BOOL, short_circuit="or")
def or_(ctx, a, b):
    return BoolV(as_bool(a) or as_bool(b))


@op("not", params=(Param("x", BOOL),), out=BOOL)
def not_(ctx, a):
    return BoolV(not as_bool(a))


@op("neg", params=(Param("x", NUM),), out=lambda ts, c: ts[0] if ts[0] in _NUMERIC else (ANY if ts[0] == ANY else None))
def neg(ctx, a):
    if isinstance(a, IntV):
        return IntV(-a.i)
    return RealV(-as_float(a))


@op("str", params=(Param("x", (BOOL, INT, REAL, STR)),), out=STR)
def to_str(ctx, v):
    if isinstance(v, BoolV):
        return StrV("true" if v.b else "false")
    if isinstance(v, IntV):
        return StrV(str(v.i))
    if isinstance(v, RealV):
        return StrV(repr(v.r))
    if isinstance(v, StrV):
        return v
    raise TypeMismatch(f"str() cannot format {v.tag}")


@op("int", params=(Param("x", NUM),), out=INT)
def to_int(ctx, v):
    """Truncate toward zero."""
    if isinstance(v, IntV):
        return v
    return IntV(int(as_float(v)))


@op("real", params=(Param("x", NUM),), out=REAL)
def to_real(ctx, v):
    return RealV(as_float(v))


def describe(v: Value) -> str:
    """Human-readable rendering used by ``print``."""
    if isinstance(v, ArrayV):
        return "[" + ", ".join("_" if x is None else describe(x) for x in v.items) + "]"
    if isinstance(v, FieldV):
        return f"field{v.dims}"
    return to_str(None, v).s
