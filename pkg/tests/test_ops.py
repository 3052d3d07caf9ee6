import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import field
from trigflow.comm import LocalComm
from trigflow.errors import (ActionIOError, DivisionByZero, DuplicateOp, EmptyInput, InconsistentFlags,
                             IndexOutOfRange, TypeMismatch)
from trigflow.ops import default_registry
from trigflow.ops.arrays import moment_vector
from trigflow.ops.registry import OpContext, OpSpec, Param, Registry
from trigflow.values import ArrayV, BoolV, FieldV, IntV, NodeKind, RealV, StrV, unwrap, value_eq

REG = default_registry()


def call(name, *args, outdir=None, names=(), stdout=None, **const):
    spec = REG.get(name)
    ctx = OpContext(node=name, step=0, rank=0, const=const, comm=LocalComm() if spec.uses_comm else None,
                    outdir=outdir, input_names=tuple(names), stdout=stdout)
    return spec.eval(ctx, *args)


def arr(*xs):
    return ArrayV([None if x is None else (IntV(x) if isinstance(x, int) else RealV(x)) for x in xs])


# --- scalars ---------------------------------------------------------------------

@pytest.mark.parametrize("name, a, b, expected", [
    ("add", IntV(2), IntV(3), IntV(5)),
    ("add", IntV(2), RealV(0.5), RealV(2.5)),
    ("add", StrV("a"), StrV("b"), StrV("ab")),
    ("sub", IntV(2), IntV(3), IntV(-1)),
    ("mul", RealV(1.5), IntV(2), RealV(3.0)),
    ("div", IntV(1), IntV(2), RealV(0.5)),
    ("mod", IntV(-7), IntV(5), IntV(3)),
    ("lt", IntV(1), RealV(1.5), BoolV(True)),
    ("ge", IntV(2), IntV(2), BoolV(True)),
    ("eq", IntV(2), RealV(2.0), BoolV(True)),
    ("ne", StrV("a"), StrV("a"), BoolV(False)),
])
def test_binary(name, a, b, expected):
    got = call(name, a, b)
    assert type(got) is type(expected) and value_eq(got, expected)


def test_division_errors():
    with pytest.raises(DivisionByZero):
        call("div", IntV(1), RealV(0.0))
    with pytest.raises(DivisionByZero):
        call("mod", IntV(1), IntV(0))
    with pytest.raises(TypeMismatch):
        call("add", IntV(1), StrV("a"))


def test_unary_and_conversions():
    assert call("neg", IntV(3)) == IntV(-3)
    assert call("not", BoolV(True)) == BoolV(False)
    assert call("str", RealV(0.1)) == StrV("0.1")
    assert call("int", RealV(-2.7)) == IntV(-2)
    assert call("real", IntV(2)) == RealV(2.0)


@given(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6).filter(bool))
def test_int_arithmetic_matches_python(a, b):
    assert call("add", IntV(a), IntV(b)).i == a + b
    assert call("mul", IntV(a), IntV(b)).i == a * b
    assert call("mod", IntV(a), IntV(b)).i == a % b


# --- arrays and fields ------------------------------------------------------------

def test_array_statistics_skip_invalid_slots():
    a = ArrayV([RealV(1.0), RealV(100.0), RealV(3.0)], [True, False, True])
    assert call("max_array", a) == RealV(3.0)
    assert call("avg_array", a) == RealV(2.0)
    assert call("min_array", field([[[4.0, -1.0]]])) == RealV(-1.0)
    with pytest.raises(EmptyInput):
        call("max_array", ArrayV([None]))


def test_list_statistics_keep_shape():
    lists = ArrayV([arr(1.0, 3.0), None, arr(5.0)])
    assert unwrap(call("avg_list", lists)) == [2.0, None, 5.0]


@settings(max_examples=50)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
def test_moments_against_direct_formulas(xs):
    x = np.array(xs)
    mean, var, skew, kurt = moment_vector(x)
    assert math.isclose(mean, sum(xs) / len(xs), rel_tol=1e-9, abs_tol=1e-9)
    direct_var = sum((v - mean) ** 2 for v in xs) / len(xs)
    assert math.isclose(var, direct_var, rel_tol=1e-7, abs_tol=1e-9)
    if var > 1e-6:
        assert kurt >= skew ** 2 + 1 - 1e-6   # Pearson's inequality


def test_moments_of_tiny_spread():
    mean, var, skew, kurt = moment_vector(np.array([0.0, 7.357514457030659e-137]))
    assert var > 0 and math.isclose(skew, 0.0, abs_tol=1e-12) and math.isclose(kurt, 1.0)


def test_moments_of_constant_and_short_input():
    assert unwrap(call("moments", arr(2.0, 2.0, 2.0))) == [2.0, 0.0, 0.0, 0.0]
    with pytest.raises(EmptyInput):
        call("moments", arr(1.0))


def test_l2_rel_dist():
    assert call("l2_rel_dist", arr(3.0, 4.0), arr(0.0, 0.0)).r == pytest.approx(5e12)
    assert call("l2_rel_dist", arr(1.0, 1.0), arr(1.0, 1.0)).r == 0.0
    assert call("l2_rel_dist", arr(2.0, 0.0), arr(1.0, 0.0)).r == pytest.approx(1.0)
    with pytest.raises(TypeMismatch):
        call("l2_rel_dist", arr(1.0), arr(1.0, 2.0))
    with pytest.raises(TypeMismatch):
        call("l2_rel_dist", ArrayV([RealV(1.0), None]), arr(1.0, 2.0))


def test_concat_list_at_valid_count():
    c = call("concat", arr(1, 2), ArrayV([None]), arr(3))
    assert unwrap(c) == [1, 2, None, 3]
    assert call("valid_count", c) == IntV(3)
    assert call("at", c, index=3) == IntV(3)
    with pytest.raises(EmptyInput):
        call("at", c, index=2)
    with pytest.raises(IndexOutOfRange):
        call("at", c, index=9)
    assert unwrap(call("list", IntV(1), StrV("a"))) == [1, "a"]


def test_normalize_and_slice():
    f = FieldV((2, 2, 2), np.arange(8.0))
    n = call("normalize", f)
    assert n.data.min() == 0.0 and n.data.max() == 1.0
    assert np.all(call("normalize", FieldV((1, 1, 2), [3.0, 3.0])).data == 0.5)
    s = call("slice_image", f, axis=2, index=1)
    assert s.dims == (2, 2, 1) and list(s.data) == [1.0, 3.0, 5.0, 7.0]
    with pytest.raises(IndexOutOfRange):
        call("slice_image", f, axis=0, index=2)


# --- reductions (single rank) -------------------------------------------------------

def test_single_rank_reductions_are_identity():
    assert call("reduce_sum", IntV(2**60 + 1)) == IntV(2**60 + 1)
    assert call("reduce_avg", IntV(3)) == RealV(3.0)
    assert unwrap(call("reduce_max", ArrayV([IntV(1), None]))) == [1, None]


# --- actions ----------------------------------------------------------------------

def test_save_csv_appends_with_header(tmp_path):
    for t in range(3):
        call("save_csv", IntV(t), arr(1.0, 2.0), StrV("out/x.csv"), outdir=tmp_path, names=("time", "v"))
    lines = (tmp_path / "out" / "x.csv").read_text().splitlines()
    assert lines == ["time,v[0],v[1]", "0,1.0,2.0", "1,1.0,2.0", "2,1.0,2.0"]


def test_save_statistics_layouts(tmp_path):
    call("save_statistics", arr(1, None), StrV("s.csv"), outdir=tmp_path, names=("w",))
    assert (tmp_path / "s.csv").read_text().splitlines() == ["w[0],w[1]", "1,"]
    nested = ArrayV([arr(1.0, 2.0), None])
    call("save_statistics", nested, StrV("n.csv"), outdir=tmp_path, names=("w",))
    assert (tmp_path / "n.csv").read_text().splitlines() == ["w[0],w[1]", "1.0,2.0", ","]


def test_save_pgm_and_field(tmp_path):
    f = FieldV((3, 2, 1), [0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    call("save_pgm", f, StrV("a.pgm"), outdir=tmp_path)
    data = (tmp_path / "a.pgm").read_bytes()
    assert data.startswith(b"P5\n2 3\n255\n") and data[-6:] == bytes([0, 51, 102, 153, 204, 255])
    call("save_field", f, StrV("f.bin"), outdir=tmp_path)
    raw = (tmp_path / "f.bin").read_bytes()
    head, body = raw.split(b"\n", 1)
    assert head == b"dims 3 2 1" and np.frombuffer(body, "<f8").tolist() == list(f.data)
    with pytest.raises(TypeMismatch):
        call("save_pgm", FieldV((2, 2, 2), np.zeros(8)), StrV("b.pgm"), outdir=tmp_path)


def test_action_io_error(tmp_path):
    (tmp_path / "blocker").write_text("")
    with pytest.raises(ActionIOError):
        call("save_csv", IntV(1), StrV("blocker/x.csv"), outdir=tmp_path, names=("a",))


def test_print():
    buf = io.StringIO()
    call("print", StrV("t ="), IntV(3), arr(1, None), stdout=buf)
    assert buf.getvalue() == "t = 3 [1, _]\n"


# --- registry ----------------------------------------------------------------------

def _spec(**kw):
    base = dict(name="f", kind=NodeKind.PURE, params=(Param("x"),), out_type="int", eval=lambda ctx, x: x)
    base.update(kw)
    return OpSpec(**base)


def test_registry_rules():
    reg = Registry([_spec()])
    with pytest.raises(DuplicateOp):
        reg.register(_spec())
    with pytest.raises(InconsistentFlags):
        Registry([_spec(is_global=True)])
    with pytest.raises(InconsistentFlags):
        Registry([_spec(kind=NodeKind.IMPURE, is_impure=True)])
    with pytest.raises(InconsistentFlags):
        Registry([_spec(short_circuit="and")])


def test_override_keeps_signature():
    reg = default_registry()
    before = reg.get("max_array")
    reg.override("max_array", lambda ctx, v: RealV(-1.0))
    after = reg.get("max_array")
    assert after.params == before.params and after.eval is not before.eval
    assert default_registry().get("max_array").eval is before.eval
