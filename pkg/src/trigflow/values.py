"""Runtime values carried along DAG edges.

Every signal evaluates, at each timestep, to one of the immutable variants
below. ``value_eq`` is the equality used by the cache; ``to_json`` /
``from_json`` are the trace encoding.
"""

from __future__ import annotations

import hashlib
import json
import math
from enum import Enum
from typing import Any, Sequence

import numpy as np

from .errors import TypeMismatch

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

# Type tags used by the compiler's signature checks.
BOOL, INT, REAL, STR, ARRAY, FIELD = "bool", "int", "real", "str", "array", "field"
NONE = "none"   # actions and triggers produce nothing
ANY = "any"
NUM = "num"     # int | real


class Value:
    """Base class; subclasses are immutable."""

    __slots__ = ()
    tag: str = ANY

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Value):
            return NotImplemented
        return value_eq(self, other)

    __hash__ = None  # type: ignore[assignment]

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")


class BoolV(Value):
    __slots__ = ("b",)
    tag = BOOL

    def __init__(self, b: bool):
        object.__setattr__(self, "b", bool(b))

    def __repr__(self):
        return f"BoolV({self.b})"


class IntV(Value):
    __slots__ = ("i",)
    tag = INT

    def __init__(self, i: int):
        i = int(i)
        if not INT64_MIN <= i <= INT64_MAX:
            raise OverflowError(f"integer {i} outside signed 64-bit range")
        object.__setattr__(self, "i", i)

    def __repr__(self):
        return f"IntV({self.i})"


class RealV(Value):
    __slots__ = ("r",)
    tag = REAL

    def __init__(self, r: float):
        object.__setattr__(self, "r", float(r))

    def __repr__(self):
        return f"RealV({self.r!r})"


class StrV(Value):
    __slots__ = ("s",)
    tag = STR

    def __init__(self, s: str):
        object.__setattr__(self, "s", str(s))

    def __repr__(self):
        return f"StrV({self.s!r})"


class ArrayV(Value):
    """Sequence of values with a validity mask.

    Invalid slots hold ``None``; their content never participates in
    comparisons or statistics.
    """

    __slots__ = ("items", "valid")
    tag = ARRAY

    def __init__(self, items: Sequence[Value | None], valid: Sequence[bool] | None = None):
        items = tuple(items)
        valid = tuple(bool(v) for v in valid) if valid is not None else tuple(x is not None for x in items)
        if len(items) != len(valid):
            raise ValueError("ArrayV items and validity mask differ in length")
        items = tuple(x if ok else None for x, ok in zip(items, valid))
        if any(x is None for x, ok in zip(items, valid) if ok):
            raise ValueError("valid ArrayV slot holds no value")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "valid", valid)

    def __len__(self):
        return len(self.items)

    def valid_items(self) -> list[Value]:
        return [x for x, ok in zip(self.items, self.valid) if ok]

    def __repr__(self):
        return f"ArrayV({list(self.items)!r}, {list(self.valid)!r})"


class FieldV(Value):
    """3-D grid of reals, stored row-major (C order) over ``dims``."""

    __slots__ = ("dims", "data")
    tag = FIELD

    def __init__(self, dims: Sequence[int], data: Any):
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise ValueError(f"field dims must be 3 positive integers, got {dims}")
        arr = np.array(data, dtype=np.float64).reshape(-1)
        if arr.size != dims[0] * dims[1] * dims[2]:
            raise ValueError(f"field data has {arr.size} values, dims {dims} need {math.prod(dims)}")
        arr.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", arr)

    def grid(self) -> np.ndarray:
        return self.data.reshape(self.dims)

    def __repr__(self):
        return f"FieldV({self.dims}, <{self.data.size} reals>)"


def _num(v: Value) -> bool:
    return isinstance(v, (IntV, RealV))


def _real_eq(a: float, b: float) -> bool:
    return a == b or (math.isnan(a) and math.isnan(b))


def value_eq(a: Value, b: Value) -> bool:
    """Structural equality with exact int/real promotion."""
    if _num(a) and _num(b):
        if isinstance(a, IntV) and isinstance(b, IntV):
            return a.i == b.i
        x = a.i if isinstance(a, IntV) else a.r
        y = b.i if isinstance(b, IntV) else b.r
        if isinstance(x, float) and isinstance(y, float):
            return _real_eq(x, y)
        return x == y
    if type(a) is not type(b):
        return False
    if isinstance(a, BoolV):
        return a.b == b.b
    if isinstance(a, StrV):
        return a.s == b.s
    if isinstance(a, ArrayV):
        if a.valid != b.valid:
            return False
        return all(x is None or value_eq(x, y) for x, y in zip(a.items, b.items))
    if isinstance(a, FieldV):
        return a.dims == b.dims and bool(np.array_equal(a.data, b.data, equal_nan=True))
    return False


def promote_numeric(a: Value, b: Value) -> tuple[Value, Value]:
    if not (_num(a) and _num(b)):
        raise TypeMismatch(f"numeric operands required, got {a.tag} and {b.tag}")
    if isinstance(a, RealV) or isinstance(b, RealV):
        return RealV(as_float(a)), RealV(as_float(b))
    return a, b


def as_float(v: Value) -> float:
    if isinstance(v, IntV):
        return float(v.i)
    if isinstance(v, RealV):
        return v.r
    raise TypeMismatch(f"expected a number, got {v.tag}")


def as_bool(v: Value) -> bool:
    if not isinstance(v, BoolV):
        raise TypeMismatch(f"expected bool, got {v.tag}")
    return v.b


def wrap(x: Any) -> Value:
    """Lift a plain Python object into a Value."""
    if isinstance(x, Value):
        return x
    if isinstance(x, (bool, np.bool_)):
        return BoolV(bool(x))
    if isinstance(x, (int, np.integer)):
        return IntV(int(x))
    if isinstance(x, (float, np.floating)):
        return RealV(float(x))
    if isinstance(x, str):
        return StrV(x)
    if isinstance(x, (list, tuple)):
        return ArrayV([wrap(i) for i in x])
    raise TypeError(f"cannot wrap {type(x).__name__} as a Value")


def unwrap(v: Value | None) -> Any:
    """Inverse of ``wrap`` for scalars and arrays (invalid slots -> None)."""
    if v is None:
        return None
    if isinstance(v, BoolV):
        return v.b
    if isinstance(v, IntV):
        return v.i
    if isinstance(v, RealV):
        return v.r
    if isinstance(v, StrV):
        return v.s
    if isinstance(v, ArrayV):
        return [unwrap(x) for x in v.items]
    return v


# --- serialization -------------------------------------------------------------

COMPACT_ARRAY_LEN = 16


def _real_text(r: float) -> str:
    return format(r, ".17g")


def to_json(v: Value | None, *, compact_fields: bool = False) -> Any:
    """JSON-compatible encoding; reals as 17-significant-digit strings.

    With ``compact_fields`` a field is reduced to its dims and a SHA-256 of
    its little-endian data, and an array longer than ``COMPACT_ARRAY_LEN``
    to its length and a SHA-256 of its full encoding. This is what the trace
    log stores; equal digests still mean equal values.
    """
    if v is None:
        return None
    if isinstance(v, BoolV):
        return {"bool": v.b}
    if isinstance(v, IntV):
        return {"int": v.i}
    if isinstance(v, RealV):
        return {"real": _real_text(v.r)}
    if isinstance(v, StrV):
        return {"str": v.s}
    if isinstance(v, ArrayV):
        enc = {"array": [to_json(x, compact_fields=compact_fields) for x in v.items], "valid": list(v.valid)}
        if compact_fields and len(v.items) > COMPACT_ARRAY_LEN:
            text = json.dumps(enc, sort_keys=True, separators=(",", ":"))
            return {"array_len": len(v.items), "sha256": hashlib.sha256(text.encode()).hexdigest()}
        return enc
    if isinstance(v, FieldV):
        if compact_fields:
            digest = hashlib.sha256(v.data.astype("<f8").tobytes()).hexdigest()
            return {"field": list(v.dims), "sha256": digest}
        return {"field": list(v.dims), "data": [_real_text(x) for x in v.data.tolist()]}
    raise TypeError(f"not a Value: {v!r}")


def from_json(obj: Any) -> Value | None:
    if obj is None:
        return None
    if "bool" in obj:
        return BoolV(obj["bool"])
    if "int" in obj:
        return IntV(obj["int"])
    if "real" in obj:
        return RealV(float(obj["real"]))
    if "str" in obj:
        return StrV(obj["str"])
    if "array" in obj:
        return ArrayV([from_json(x) for x in obj["array"]], obj["valid"])
    if "array_len" in obj:
        raise ValueError("compact array encoding cannot be decoded")
    if "field" in obj:
        if "data" not in obj:
            raise ValueError("compact field encoding cannot be decoded")
        return FieldV(obj["field"], [float(x) for x in obj["data"]])
    raise ValueError(f"unrecognised value encoding: {obj!r}")


# --- type tags -------------------------------------------------------------------

def type_accepts(expected: str | tuple[str, ...], got: str) -> bool:
    """Whether a signal of type ``got`` may feed a parameter typed ``expected``."""
    if isinstance(expected, tuple):
        return any(type_accepts(e, got) for e in expected)
    if expected == ANY or got == ANY:
        return True
    if expected == NUM:
        return got in (INT, REAL)
    if expected == REAL:
        return got in (INT, REAL)
    return expected == got


def describe_type(expected: str | tuple[str, ...]) -> str:
    if isinstance(expected, tuple):
        return " | ".join(expected)
    return expected


class NodeKind(str, Enum):
    SOURCE = "Source"
    PURE = "PureFn"
    IMPURE = "ImpureFn"
    ACTION = "Action"
    TRIGGER = "Trigger"
