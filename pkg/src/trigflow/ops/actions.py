"""Side-effecting operators. They only run when their trigger fires.

Relative paths resolve against the engine's output directory.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import numpy as np

from ..errors import ActionIOError, TypeMismatch
from ..values import ANY, ARRAY, FIELD, STR, ArrayV, FieldV, NodeKind, StrV, Value
from .registry import Param, op
from .scalar import describe

ACTION = NodeKind.ACTION


def _target(ctx, path: Value) -> Path:
    if not isinstance(path, StrV):
        raise TypeMismatch(f"path must be a string, got {path.tag}")
    p = Path(path.s)
    if not p.is_absolute() and ctx.outdir is not None:
        p = Path(ctx.outdir) / p
    return p


def _writing(ctx, path: Value, mode: str, write, newline=None):
    p = _target(ctx, path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        kwargs = {} if "b" in mode else {"newline": newline if newline is not None else "", "encoding": "utf-8"}
        with open(p, mode, **kwargs) as fh:
            write(fh)
    except OSError as exc:
        raise ActionIOError(str(p), exc) from exc
    return p


def cell(v: Value | None) -> str:
    if v is None:
        return ""
    return describe(v)


def _cells(v: Value) -> list[str]:
    if isinstance(v, ArrayV):
        return [cell(x) for x in v.items]
    if isinstance(v, FieldV):
        return [cell(v)]
    return [cell(v)]


def _header(names, values) -> list[str]:
    out = []
    for name, v in zip(names, values):
        if isinstance(v, ArrayV):
            out.extend(f"{name}[{i}]" for i in range(len(v)))
        else:
            out.append(name)
    return out


@op("save_csv", kind=ACTION, params=(Param("values", ANY, variadic=True), Param("path", STR)))
def save_csv(ctx, *args):
    """Append one row; a header of input names is written when the file is created."""
    *values, path = args
    p = _target(ctx, path)
    fresh = not p.exists()

    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(_header(ctx.input_names[:len(values)], values))
        w.writerow([c for v in values for c in _cells(v)])

    _writing(ctx, path, "a", write)


def statistics_rows(data: ArrayV) -> list[list[str]]:
    """Window contents as table rows.

    A window of scalars is one row; a window of arrays has one row per slot.
    Invalid slots become empty cells.
    """
    if not any(isinstance(x, ArrayV) for x in data.items):
        return [[cell(x) for x in data.items]]
    width = max(len(x) for x in data.items if x is not None)
    rows = []
    for x in data.items:
        rows.append(_cells(x) + [""] * (width - len(x)) if x is not None else [""] * width)
    return rows


@op("save_statistics", kind=ACTION, params=(Param("data", ARRAY), Param("path", STR)))
def save_statistics(ctx, data, path):
    """Overwrite ``path`` with the contents of a window."""
    rows = statistics_rows(data)
    name = ctx.input_names[0] if ctx.input_names else "data"
    header = [f"{name}[{i}]" for i in range(len(rows[0]))]

    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)

    _writing(ctx, path, "w", write)


@op("save_field", kind=ACTION, params=(Param("field", FIELD), Param("path", STR)))
def save_field(ctx, f, path):
    """ASCII ``dims nx ny nz`` line followed by little-endian float64 data."""
    def write(fh):
        fh.write(("dims %d %d %d\n" % f.dims).encode("ascii"))
        fh.write(f.data.astype("<f8").tobytes())

    _writing(ctx, path, "wb", write)


def image_of(f: FieldV) -> np.ndarray:
    """The field as a 2-D array (unit axes dropped), scaled to 0..255."""
    img = f.grid().squeeze()
    if img.ndim > 2:
        raise TypeMismatch(f"save_pgm needs a 2-D slice, got dims {f.dims}")
    img = np.atleast_2d(img)
    lo, hi = float(img.min()), float(img.max())
    if hi == lo:
        return np.full(img.shape, 128, dtype=np.uint8)
    return np.rint((img - lo) / (hi - lo) * 255.0).astype(np.uint8)


@op("save_pgm", kind=ACTION, params=(Param("image", FIELD), Param("path", STR)))
def save_pgm(ctx, f, path):
    """Binary P5 greyscale image, min-max scaled; a constant image is mid-grey."""
    img = image_of(f)
    h, w = img.shape

    def write(fh):
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())

    _writing(ctx, path, "wb", write)


@op("print", kind=ACTION, params=(Param("values", ANY, variadic=True),))
def print_(ctx, *values):
    out = ctx.stdout or sys.stdout
    out.write(" ".join(describe(v) for v in values) + "\n")
