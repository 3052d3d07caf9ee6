"""Cross-rank reductions. These are the intrinsic global operators."""

from __future__ import annotations

from ..errors import TypeMismatch
from ..values import ANY, ARRAY, INT, NUM, REAL, ArrayV, IntV, RealV
from .registry import Param, op


def _exact(x):
    """Ints stay Python ints so sums and extrema of large counts are exact."""
    return x.i if isinstance(x, IntV) else x.r


def _flatten(v):
    if isinstance(v, (IntV, RealV)):
        return [_exact(v)], None
    if isinstance(v, ArrayV):
        vals = []
        for x in v.items:
            if x is None:
                vals.append(0.0)
            elif isinstance(x, (IntV, RealV)):
                vals.append(_exact(x))
            else:
                raise TypeMismatch(f"reductions need numeric array items, got {x.tag}")
        return vals, list(v.valid)
    raise TypeMismatch(f"reductions need a number or numeric array, got {v.tag}")


def allreduce_value(comm, v, how: str):
    """Elementwise reduction of ``v`` across ranks.

    Arrays take two collectives: the validity masks are AND-ed, then the
    values are combined. A slot invalid on any rank is invalid in the result.
    """
    vals, valid = _flatten(v)
    if valid is not None:
        valid = comm.allreduce(valid, "and")
    combiner = "sum" if how == "avg" else how
    out = comm.allreduce(vals, combiner)
    if how == "avg":
        out = [x / comm.size for x in out]
    keep_int = how != "avg" and isinstance(v, IntV)
    if valid is None:
        return IntV(int(out[0])) if keep_int else RealV(float(out[0]))
    items = []
    for x, ok, orig in zip(out, valid, v.items):
        if not ok:
            items.append(None)
        elif how != "avg" and isinstance(orig, IntV):
            items.append(IntV(int(x)))
        else:
            items.append(RealV(float(x)))
    return ArrayV(items, valid)


def _result(how):
    def typer(ts, _const):
        t = ts[0]
        if t == ARRAY or t == ANY:
            return t
        if how == "avg":
            return REAL
        return t if t in (INT, REAL) else None
    return typer


def _make(how: str):
    @op(f"reduce_{how}", params=(Param("x", (NUM, ARRAY)),), out=_result(how), is_global=True, uses_comm=True)
    def reduce(ctx, x):
        return allreduce_value(ctx.comm, x, how)
    reduce.__doc__ = f"Elementwise {how} over all ranks."
    return reduce


for _how in ("sum", "avg", "max", "min"):
    _make(_how)
