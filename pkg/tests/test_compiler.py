import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trigflow.compiler import (GraphBuilder, build_namespace, compile_source, export_dot, find_cycle,
                               propagate_globalness, topo_sort)
from trigflow.errors import (ArityError, CompileError, ConfigError, CycleError, DuplicateName,
                             SignalTypeError, UndefinedName, UnknownOperator)
from trigflow.harness import bundled_workflows, case_study_dag, workflow_source
from trigflow.parser import parse_source
from trigflow.values import BOOL, INT, REAL, IntV, NodeKind

RENDER = workflow_source("periodic_render")


def test_builder_cycle_names_the_cycle():
    b = GraphBuilder(source_types={"x": INT})
    b.source("x")
    b.apply("a", "add", ["data.x", "c"])
    b.apply("b", "neg", ["a"])
    b.apply("c", "neg", ["b"])
    with pytest.raises(CycleError) as exc:
        b.build()
    cyc = exc.value.cycle
    assert sorted(cyc) == ["a", "b", "c"]
    # reported in data-flow order: each name feeds the next
    for u, v in zip(cyc, cyc[1:] + cyc[:1]):
        assert u in b.templates[v].inputs
    assert "->" in exc.value.message


def test_self_loop_is_a_cycle():
    b = GraphBuilder()
    b.apply("a", "not", ["a"])
    with pytest.raises(CycleError) as exc:
        b.build()
    assert exc.value.cycle == ["a"]


def test_builder_undefined_and_duplicate():
    b = GraphBuilder()
    b.apply("a", "not", ["missing"])
    with pytest.raises(UndefinedName):
        b.build()
    with pytest.raises(DuplicateName):
        b.apply("a", "not", ["x"])


def test_topo_order_ties_go_to_smallest_id():
    assert topo_sort(4, [(), (), (1,), (0,)]) == [0, 1, 2, 3]
    assert topo_sort(4, [(3,), (), (), ()]) == [1, 2, 3, 0]


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 14).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n),
    st.lists(st.integers(0, n - 1), max_size=3))))
def test_graph_algorithms_against_networkx(case):
    n, edges, intrinsic = case
    inputs = [sorted({u for u, v in edges if v == w}) for w in range(n)]
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    g.add_edges_from((u, v) for u, v in edges)
    order = topo_sort(n, inputs)
    if nx.is_directed_acyclic_graph(g):
        assert order == list(nx.lexicographical_topological_sort(g))
        expected = set(intrinsic).union(*(nx.descendants(g, i) for i in intrinsic))
        assert propagate_globalness(n, inputs, intrinsic) == expected
    else:
        assert len(order) < n
        cyc = find_cycle([str(i) for i in range(n)], inputs, set(order))
        ids = [int(c) for c in cyc]
        assert all(g.has_edge(u, v) for u, v in zip(ids, ids[1:] + ids[:1]))


def test_periodic_render_compiles_with_expected_shape():
    dag = compile_source(RENDER)
    kinds = [n.kind for n in dag.nodes]
    assert kinds.count(NodeKind.ACTION) == 1 and kinds.count(NodeKind.TRIGGER) == 1
    assert not any(n.is_global for n in dag.nodes)
    assert dag.node("render").op == "slice_image"
    assert dag.node("render").config() == {"axis": 2, "index": 0}


def test_every_bundled_workflow_compiles():
    for name in bundled_workflows():
        compile_source(workflow_source(name))


def test_case_study_global_set_is_reduce_avg_descendants():
    dag = case_study_dag()
    g = nx.DiGraph()
    for n in dag.nodes:
        g.add_edges_from((j, n.id) for j in n.inputs)
    roots = [n.id for n in dag.nodes if n.op == "reduce_avg"]
    assert len(roots) == 1
    expected = {roots[0]} | nx.descendants(g, roots[0])
    assert {n.id for n in dag.nodes if n.is_global} == expected
    assert dag.node("m1").is_global and not dag.node("m2").is_global
    assert not dag.node("hr").is_global and not dag.node("valid").is_global


def test_globalness_is_consistent_with_inputs():
    dag = case_study_dag()
    for n in dag.nodes:
        intrinsic = n.op.startswith("reduce_")
        assert n.is_global == (intrinsic or any(dag.nodes[j].is_global for j in n.inputs))


def test_type_inference():
    dag = compile_source("a = 1 + 2\nb = a / 2\nc = a < b\nd = \"x\" + str(a)")
    assert [dag.node(x).out_type for x in "abc"] == [INT, REAL, BOOL]
    assert dag.node("d").out_type == "str"


def test_config_args_resolve_through_const_aliases():
    dag = compile_source("len = 40\nl2 = len\nw = window(true, time, l2)")
    assert dag.node("w").config()["max_size"] == 40
    assert dag.node("w").config()["min_size"] is None


def test_namespace_excludes_synthesized_nodes():
    ns = build_namespace(parse_source(RENDER))
    names = ns.names()
    assert names[:2] == ["volume", "render"]
    assert "trigger0#1" in names
    assert not any(n in names for n in ("time", "data.temperature", "trigger0", "trigger0#c1"))
    assert not any(n.endswith(":save_pgm") for n in names)


@pytest.mark.parametrize("src, exc_type, line, col", [
    ("x = frobnicate(1)", UnknownOperator, 1, 5),
    ("x = y + 1", UndefinedName, 1, 5),
    ("x = data", CompileError, 1, 5),
    ("Trigger(time + 1) { print(time) }", SignalTypeError, 1, 1),
    ("x = 1 && true", SignalTypeError, 1, 7),
    ("x = neg(1, 2)", ArityError, 1, 5),
    ("x = window(true, time, time)", ConfigError, 1, 24),
    ("x = window(true, time, 3, 5)", ConfigError, 1, 5),
    ("x = countN(true, 0)", ConfigError, 1, 5),
    ("x = at(list(1), -1)", ConfigError, 1, 5),
    ("x = slice_image(data.t, 3, 0)", ConfigError, 1, 5),
    ("x = print(1)", CompileError, 1, 5),
    ("Trigger(true) { max_array(data.x) }", CompileError, 1, 17),
    ("x = window(true, time, 3, bogus = 1)", ArityError, 1, 5),
])
def test_positioned_diagnostics(src, exc_type, line, col):
    with pytest.raises(exc_type) as exc:
        compile_source(src)
    assert (exc.value.line, exc.value.col) == (line, col)
    assert exc.value.diagnostic("w.diva").startswith(f"w.diva:{line}:{col}: ")


def test_action_outside_trigger_via_builder():
    b = GraphBuilder()
    b.const("k", IntV(1))
    b.apply("p", "print", ["k"])
    with pytest.raises(CompileError, match="inside a Trigger"):
        b.build()


def test_trigger_predicate_must_be_bool_via_builder():
    b = GraphBuilder()
    b.const("k", IntV(1))
    b.apply("p", "print", ["k"])
    b.trigger("t", "k", ["p"])
    with pytest.raises(SignalTypeError):
        b.build()


def test_fingerprint_is_stable_and_sensitive():
    a, b = compile_source(RENDER), compile_source(RENDER)
    assert a.fingerprint == b.fingerprint
    assert compile_source(RENDER.replace("% 5", "% 6")).fingerprint != a.fingerprint


def test_dot_export():
    dot = export_dot(compile_source(RENDER))
    assert dot.startswith("digraph diva {") and dot.rstrip().endswith("}")
    assert "shape=doubleoctagon" in dot and "shape=triangle" in dot and "style=dashed" in dot
    assert export_dot(compile_source("")) == "digraph diva {}\n"
    glob = export_dot(compile_source("m = reduce_avg(max_array(data.t))"))
    assert "color=red" in glob
