"""Pure statistics over fields and arrays, plus field slicing.

Array statistics skip invalid slots. ``moments`` and ``l2_rel_dist`` make up
the feature-moment surrogate used by the anomaly workflow: the fingerprint of
a rank is the concatenation of per-field moments, compared against the
cross-rank mean (spatial metric) and against the previous sample (temporal
metric).
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, EmptyInput, IndexOutOfRange, TypeMismatch
from ..values import (ANY, ARRAY, FIELD, INT, REAL, ArrayV, FieldV, IntV, RealV, Value, as_float)
from .registry import Param, op


def numbers(v: Value) -> np.ndarray:
    """Valid numeric content of a field or array as float64."""
    if isinstance(v, FieldV):
        return v.data
    if isinstance(v, ArrayV):
        return np.array([as_float(x) for x in v.valid_items()], dtype=np.float64)
    if isinstance(v, (IntV, RealV)):
        return np.array([as_float(v)])
    raise TypeMismatch(f"expected a field or numeric array, got {v.tag}")


def _nonempty(v: Value, what: str) -> np.ndarray:
    xs = numbers(v)
    if xs.size == 0:
        raise EmptyInput(f"{what}: no valid values")
    return xs


_STATS = {"max": np.max, "min": np.min, "avg": np.mean}


def _make_stat(kind: str):
    fn = _STATS[kind]

    @op(f"{kind}_array", params=(Param("x", (FIELD, ARRAY)),), out=REAL)
    def stat(ctx, v):
        return RealV(float(fn(_nonempty(v, f"{kind}_array"))))

    @op(f"{kind}_list", params=(Param("x", ARRAY),), out=ARRAY)
    def stat_list(ctx, v):
        if not isinstance(v, ArrayV):
            raise TypeMismatch(f"{kind}_list expects an array, got {v.tag}")
        out = [RealV(float(fn(_nonempty(x, f"{kind}_list")))) if x is not None else None for x in v.items]
        return ArrayV(out, v.valid)

    return stat, stat_list


for _kind in _STATS:
    _make_stat(_kind)


def moment_vector(xs: np.ndarray) -> list[float]:
    """[mean, population variance, skewness, kurtosis (non-excess)].

    Skewness and kurtosis are 0 when the variance is 0.
    """
    mean = float(np.mean(xs))
    centered = xs - mean
    var = float(np.mean(centered ** 2))
    if var == 0.0:
        return [mean, 0.0, 0.0, 0.0]
    # standardize first; var ** 1.5 underflows for tiny but nonzero spreads
    z = centered / math.sqrt(var)
    return [mean, var, float(np.mean(z ** 3)), float(np.mean(z ** 4))]


@op("moments", params=(Param("x", (FIELD, ARRAY)),), out=ARRAY)
def moments(ctx, v):
    xs = numbers(v)
    if xs.size < 2:
        raise EmptyInput("moments need at least 2 values")
    return ArrayV([RealV(m) for m in moment_vector(xs)])


def rel_dist(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / (np.linalg.norm(b) + 1e-12))


@op("l2_rel_dist", params=(Param("a", ARRAY), Param("b", ARRAY)), out=REAL)
def l2_rel_dist(ctx, a, b):
    """||a - b|| / (||b|| + 1e-12)."""
    if not (isinstance(a, ArrayV) and isinstance(b, ArrayV)):
        raise TypeMismatch("l2_rel_dist expects two arrays")
    if len(a) != len(b) or not (all(a.valid) and all(b.valid)):
        raise TypeMismatch(f"l2_rel_dist needs fully valid arrays of equal length ({len(a)} vs {len(b)})")
    return RealV(rel_dist(numbers(a), numbers(b)))


@op("concat", params=(Param("arrays", ARRAY, variadic=True),), out=ARRAY)
def concat(ctx, *arrays):
    items, valid = [], []
    for arr in arrays:
        items.extend(arr.items)
        valid.extend(arr.valid)
    return ArrayV(items, valid)


@op("list", params=(Param("items", ANY, variadic=True),), out=ARRAY)
def make_list(ctx, *items):
    return ArrayV(items)


def _check_index(const):
    if const["index"] < 0:
        raise ConfigError(f"negative index {const['index']}")


@op("at", params=(Param("array", ARRAY), Param("index", INT, config=True)), out=ANY, check=_check_index)
def at(ctx, arr, *_):
    """Item ``index`` of an array, oldest-first for windows."""
    i = ctx.const["index"]
    if i >= len(arr):
        raise IndexOutOfRange(f"index {i} outside array of length {len(arr)}")
    if not arr.valid[i]:
        raise EmptyInput(f"slot {i} is undefined")
    return arr.items[i]


@op("valid_count", params=(Param("array", ARRAY),), out=INT)
def valid_count(ctx, arr):
    return IntV(sum(arr.valid))


@op("normalize", params=(Param("field", FIELD),), out=FIELD)
def normalize(ctx, f):
    """Min-max scale into [0, 1]; a constant field maps to 0.5."""
    lo, hi = float(f.data.min()), float(f.data.max())
    if hi == lo:
        return FieldV(f.dims, np.full(f.data.size, 0.5))
    return FieldV(f.dims, (f.data - lo) / (hi - lo))


def slice_field(f: FieldV, axis: int, index: int) -> FieldV:
    if not 0 <= index < f.dims[axis]:
        raise IndexOutOfRange(f"slice index {index} outside 0..{f.dims[axis] - 1} on axis {axis}")
    plane = np.take(f.grid(), [index], axis=axis)
    return FieldV(plane.shape, plane)


def _check_axis(const):
    if const["axis"] not in (0, 1, 2):
        raise ConfigError(f"axis must be 0, 1 or 2, got {const['axis']}")


@op("slice_image", params=(Param("field", FIELD), Param("axis", INT, config=True),
                           Param("index", INT, config=True)), out=FIELD, check=_check_axis)
def slice_image(ctx, f, *_):
    """2-D slice of a field; the sliced axis keeps extent 1."""
    return slice_field(f, ctx.const["axis"], ctx.const["index"])
