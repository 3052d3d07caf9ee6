"""Lowering from the AST to a validated, topologically ordered DAG.

Two layers are exposed. :class:`GraphBuilder` is the low-level API: nodes
are declared by name and may reference names declared later, so arbitrary
(including cyclic) graphs can be described; :meth:`GraphBuilder.build`
validates them. :func:`compile` walks a parsed workflow and drives a
builder.

Besides registry operators, five structural node kinds exist: ``source``
(a simulation field, ``data.X``), ``time``, ``const`` (a literal), ``id``
(an alias such as ``a = b``) and ``trigger``.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .errors import (ArityError, CompileError, ConfigError, CycleError, DuplicateName, SignalTypeError,
                     UndefinedName, UnknownOperator, WorkflowError)
from .ops import default_registry
from .ops.registry import OpSpec, Registry, bind_arguments
from .ops.scalar import BINARY, UNARY, describe
from .tree import Assign, Binary, Call, Expr, Literal, Member, Ref, TriggerBlock, Unary, WorkflowAst
from .values import (BOOL, FIELD, INT, NONE, IntV, NodeKind, RealV, Value, describe_type, to_json,
                     type_accepts, unwrap, wrap)

STRUCTURAL = ("source", "time", "const", "id", "trigger")


@dataclass(frozen=True)
class DagNode:
    id: int
    name: str
    kind: NodeKind
    op: str
    const_args: Mapping[str, Value | None]
    inputs: tuple[int, ...]
    is_global: bool
    is_impure: bool
    out_type: str
    line: int = 0
    col: int = 0

    def config(self) -> dict[str, Any]:
        """Compile-time arguments as plain Python values."""
        return {k: unwrap(v) for k, v in self.const_args.items()}


@dataclass(frozen=True)
class TriggerContract:
    node: int
    predicate: int
    actions: tuple[int, ...]


@dataclass(frozen=True)
class Dag:
    nodes: tuple[DagNode, ...]
    topo_order: tuple[int, ...]
    triggers: tuple[TriggerContract, ...]
    impure_order: tuple[int, ...]
    fingerprint: str = ""
    by_name: Mapping[str, int] = field(default_factory=dict, compare=False)

    def node(self, name: str) -> DagNode:
        return self.nodes[self.by_name[name]]

    def consumers(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.nodes]
        for n in self.nodes:
            for i in n.inputs:
                out[i].append(n.id)
        return out

    @property
    def sources(self) -> list[DagNode]:
        return [n for n in self.nodes if n.op == "source"]


@dataclass
class NodeTemplate:
    """A node before name resolution; inputs are names."""

    name: str
    op: str
    inputs: list[str]
    const_args: dict[str, Value | None] = field(default_factory=dict)
    kind: NodeKind | None = None
    out_type: str | None = None      # fixed type for sources and consts
    line: int = 0
    col: int = 0
    synthesized: bool = False


class GraphBuilder:
    """Low-level construction API.

    Nodes are added by name; inputs are names that may be declared later.
    Nothing is validated until :meth:`build`.
    """

    def __init__(self, registry: Registry | None = None, source_types: Mapping[str, str] | None = None):
        self.registry = registry if registry is not None else default_registry()
        self.source_types = dict(source_types or {})
        self.templates: dict[str, NodeTemplate] = {}
        self.trigger_specs: list[tuple[str, str, list[str]]] = []

    def _add(self, t: NodeTemplate) -> str:
        if t.name in self.templates:
            raise DuplicateName(f"{t.name!r} is already defined", t.line, t.col)
        self.templates[t.name] = t
        return t.name

    def source(self, field_name: str, type_tag: str | None = None) -> str:
        name = f"data.{field_name}"
        if name not in self.templates:
            tag = type_tag or self.source_types.get(field_name, FIELD)
            self._add(NodeTemplate(name, "source", [], {"field": None}, NodeKind.SOURCE, tag))
        return name

    def time(self) -> str:
        if "time" not in self.templates:
            self._add(NodeTemplate("time", "time", [], {}, NodeKind.SOURCE, INT))
        return "time"

    def const(self, name: str, value: Value, line: int = 0, col: int = 0, synthesized: bool = False) -> str:
        return self._add(NodeTemplate(name, "const", [], {"value": value}, NodeKind.PURE, value.tag,
                                      line, col, synthesized))

    def alias(self, name: str, target: str, line: int = 0, col: int = 0) -> str:
        return self._add(NodeTemplate(name, "id", [target], {}, NodeKind.PURE, None, line, col))

    def apply(self, name: str, op: str, inputs: Sequence[str] = (), const: Mapping[str, Any] | None = None,
              line: int = 0, col: int = 0, synthesized: bool = False) -> str:
        spec = self.registry.get(op)
        const_args = {k: v if v is None or isinstance(v, Value) else wrap(v)
                      for k, v in (const or {}).items()}
        return self._add(NodeTemplate(name, op, list(inputs), const_args, spec.kind, None, line, col, synthesized))

    def trigger(self, name: str, predicate: str, actions: Sequence[str], line: int = 0, col: int = 0) -> str:
        if not actions:
            raise CompileError(f"{name}: a trigger needs at least one action", line, col)
        self._add(NodeTemplate(name, "trigger", [predicate], {}, NodeKind.TRIGGER, NONE, line, col))
        self.trigger_specs.append((name, predicate, list(actions)))
        return name

    # --- validation ------------------------------------------------------------

    def build(self) -> Dag:
        names = list(self.templates)
        ids = {n: i for i, n in enumerate(names)}
        inputs: list[tuple[int, ...]] = []
        for t in self.templates.values():
            for ref in t.inputs:
                if ref not in ids:
                    raise UndefinedName(f"{t.name}: undefined name {ref!r}", t.line, t.col)
            inputs.append(tuple(ids[r] for r in t.inputs))
        order = topo_sort(len(names), inputs)
        if len(order) < len(names):
            raise CycleError(find_cycle(names, inputs, set(order)))

        triggered: set[str] = set()
        for _, _, acts in self.trigger_specs:
            for a in acts:
                if a not in ids:
                    raise UndefinedName(f"undefined action {a!r}")
                triggered.add(a)

        kinds, out_types, impure = {}, {}, {}
        for i in order:
            t = self.templates[names[i]]
            in_types = [out_types[j] for j in inputs[i]]
            kind, tag, is_impure = self._check_node(t, in_types, names[i] in triggered, names, inputs[i], kinds)
            kinds[i], out_types[i], impure[i] = kind, tag, is_impure

        intrinsic = [i for i, n in enumerate(names) if self._spec(self.templates[n]) is not None
                     and self._spec(self.templates[n]).is_global]
        glob = propagate_globalness(len(names), inputs, intrinsic)

        nodes = tuple(DagNode(i, n, kinds[i], self.templates[n].op, dict(self.templates[n].const_args),
                              inputs[i], i in glob, impure[i], out_types[i],
                              self.templates[n].line, self.templates[n].col)
                      for i, n in enumerate(names))
        triggers = tuple(TriggerContract(ids[tn], ids[p], tuple(ids[a] for a in acts))
                         for tn, p, acts in self.trigger_specs)
        impure_order = tuple(i for i in order if nodes[i].is_impure)
        dag = Dag(nodes, tuple(order), triggers, impure_order, "", dict(ids))
        return Dag(nodes, tuple(order), triggers, impure_order, dag_fingerprint(dag), dict(ids))

    def _spec(self, t: NodeTemplate) -> OpSpec | None:
        return None if t.op in STRUCTURAL else self.registry.get(t.op)

    def _check_node(self, t, in_types, is_triggered, names, input_ids, kinds):
        if t.op in ("source", "time", "const"):
            return t.kind, t.out_type, False
        if t.op == "id":
            return NodeKind.PURE, in_types[0], False
        if t.op == "trigger":
            if not type_accepts(BOOL, in_types[0]):
                raise SignalTypeError(t.name, "bool predicate", in_types[0], t.line, t.col)
            return NodeKind.TRIGGER, NONE, False
        spec = self.registry.get(t.op)
        for j in input_ids:
            if kinds.get(j) in (NodeKind.ACTION, NodeKind.TRIGGER):
                raise CompileError(f"{t.name}: {names[j]!r} produces no value", t.line, t.col)
        if spec.kind == NodeKind.ACTION and not is_triggered:
            raise CompileError(f"{t.name}: action {spec.name!r} may only appear inside a Trigger block",
                               t.line, t.col)
        signal = spec.signal_params
        variadic = next((p for p in signal if p.variadic), None)
        fixed = [p for p in signal if not p.variadic]
        if variadic is None and len(in_types) != len(signal):
            raise ArityError(f"{t.name}: {spec.name}() takes {len(signal)} signal inputs, got {len(in_types)}",
                             t.line, t.col)
        if variadic is not None and len(in_types) < len(fixed):
            raise ArityError(f"{t.name}: {spec.name}() needs at least {len(fixed)} signal inputs", t.line, t.col)
        for p, got in zip(_expand_params(signal, len(in_types)), in_types):
            if not type_accepts(p.type, got):
                raise SignalTypeError(t.name, f"{describe_type(p.type)} for {p.name!r}", got, t.line, t.col)
        const = _complete_const(spec, t)
        try:
            if spec.check is not None:
                spec.check(const)
        except CompileError as exc:
            raise ConfigError(f"{t.name}: {exc.message}", t.line, t.col) from None
        tag = spec.result_type(in_types, const)
        if tag is None:
            raise SignalTypeError(t.name, f"operands accepted by {spec.name}()", ", ".join(in_types), t.line, t.col)
        if spec.kind == NodeKind.ACTION:
            tag = NONE
        return spec.kind, tag, spec.is_impure


def _expand_params(signal, n):
    """Parameter for each of ``n`` signal inputs, expanding the variadic one."""
    var_i = next((i for i, p in enumerate(signal) if p.variadic), None)
    if var_i is None:
        return list(signal)
    before, after = list(signal[:var_i]), list(signal[var_i + 1:])
    return before + [signal[var_i]] * (n - len(before) - len(after)) + after


def _complete_const(spec: OpSpec, t: NodeTemplate) -> dict[str, Any]:
    for p in spec.config_params:
        if p.name not in t.const_args:
            if p.required:
                raise ArityError(f"{t.name}: {spec.name}() missing configuration {p.name!r}", t.line, t.col)
            t.const_args[p.name] = p.default
        v = t.const_args[p.name]
        if v is not None and not type_accepts(p.type, v.tag):
            raise SignalTypeError(t.name, f"{describe_type(p.type)} for {p.name!r}", v.tag, t.line, t.col)
    extra = set(t.const_args) - {p.name for p in spec.config_params}
    if extra:
        raise ArityError(f"{t.name}: {spec.name}() has no configuration {sorted(extra)[0]!r}", t.line, t.col)
    return {k: unwrap(v) for k, v in t.const_args.items()}


# --- graph algorithms -------------------------------------------------------------

def topo_sort(n: int, inputs: Sequence[Sequence[int]]) -> list[int]:
    """Kahn's algorithm; ties go to the smallest id. Returns a partial
    order if the graph has a cycle."""
    indeg = [len(set(ins)) for ins in inputs]
    consumers: list[set[int]] = [set() for _ in range(n)]
    for v, ins in enumerate(inputs):
        for u in ins:
            consumers[u].add(v)
    ready = [v for v in range(n) if indeg[v] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        for v in sorted(consumers[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(ready, v)
    return order


def find_cycle(names: Sequence[str], inputs: Sequence[Sequence[int]], done: set[int]) -> list[str]:
    """Names along one cycle among the nodes Kahn's algorithm left behind."""
    # every leftover node has a leftover input, so walking inputs must revisit
    start = min(v for v in range(len(names)) if v not in done)
    seen: dict[int, int] = {}
    path: list[int] = []
    v = start
    while v not in seen:
        seen[v] = len(path)
        path.append(v)
        v = min(u for u in inputs[v] if u not in done)
    cycle = path[seen[v]:]
    cycle.reverse()   # report in data-flow direction, from the lowest id
    k = cycle.index(min(cycle))
    return [names[i] for i in cycle[k:] + cycle[:k]]


def propagate_globalness(n: int, inputs: Sequence[Sequence[int]], intrinsic: Sequence[int]) -> set[int]:
    """Nodes forward-reachable from an intrinsic global node (inclusive)."""
    consumers: list[list[int]] = [[] for _ in range(n)]
    for v, ins in enumerate(inputs):
        for u in ins:
            consumers[u].append(v)
    marked = set(intrinsic)
    queue = deque(intrinsic)
    while queue:
        u = queue.popleft()
        for v in consumers[u]:
            if v not in marked:
                marked.add(v)
                queue.append(v)
    return marked


def dag_fingerprint(dag: Dag) -> str:
    canon = [[n.id, n.name, n.kind.value, n.op, {k: to_json(v) for k, v in sorted(n.const_args.items())},
              list(n.inputs)] for n in dag.nodes]
    canon.append([[t.node, t.predicate, list(t.actions)] for t in dag.triggers])
    return hashlib.sha256(json.dumps(canon, sort_keys=True).encode()).hexdigest()


# --- AST lowering --------------------------------------------------------------------

class _Lowering:
    def __init__(self, builder: GraphBuilder):
        self.b = builder
        self.reg = builder.registry
        self.counters: dict[str, int] = {}
        self.defined: set[str] = set()
        self.entries: list[str] = []
        self.n_triggers = 0

    def fresh(self, owner: str, prefix: str = "") -> str:
        k = self.counters.get(owner + prefix, 0) + 1
        self.counters[owner + prefix] = k
        return f"{owner}#{prefix}{k}"

    def statement(self, st):
        if isinstance(st, Assign):
            for name, e in zip(st.targets, st.exprs):
                if name in self.defined:
                    raise DuplicateName(f"{name!r} is already defined", st.line, st.col)
                self.lower(e, name, name, root=True)
                self.defined.add(name)
                self.entries.append(name)
        else:
            self.trigger(st)

    def trigger(self, st: TriggerBlock):
        tname = f"trigger{self.n_triggers}"
        self.n_triggers += 1
        if isinstance(st.predicate, Ref) and st.predicate.name in self.defined:
            pred = st.predicate.name
        else:
            pred = self.lower(st.predicate, self.fresh(tname), tname)
        actions = []
        for i, call in enumerate(st.body):
            if call.callee not in self.reg:
                raise UnknownOperator(f"unknown operator {call.callee!r}", call.line, call.col)
            if self.reg.get(call.callee).kind != NodeKind.ACTION:
                raise CompileError(f"{call.callee!r} is not an action and cannot appear in a Trigger body",
                                   call.line, call.col)
            aname = f"{tname}.{i}:{call.callee}"
            actions.append(self.call(call, aname, aname, in_trigger=True))
        self.b.trigger(tname, pred, actions, st.line, st.col)

    def lower(self, e: Expr, name: str, owner: str, root: bool = False) -> str:
        """Emit nodes for ``e``; the node for ``e`` itself is called ``name``."""
        if isinstance(e, Literal):
            return self.b.const(name, e.value, e.line, e.col, synthesized=not root)
        if isinstance(e, Ref):
            if e.name == "time":
                target = self.b.time()
            elif e.name == "data":
                raise CompileError("'data' needs a field name, as in data.temperature", e.line, e.col)
            elif e.name in self.defined:
                target = e.name
            else:
                raise UndefinedName(f"undefined name {e.name!r}", e.line, e.col)
            return self.b.alias(name, target, e.line, e.col) if root else target
        if isinstance(e, Member):
            if not (isinstance(e.base, Ref) and e.base.name == "data"):
                raise CompileError("member access is only defined on 'data'", e.line, e.col)
            target = self.b.source(e.field)
            return self.b.alias(name, target, e.line, e.col) if root else target
        if isinstance(e, Binary):
            call = Call(BINARY[e.op], (e.lhs, e.rhs), (), e.line, e.col)
            return self.call(call, name, owner)
        if isinstance(e, Unary):
            if e.op == "-" and isinstance(e.operand, Literal) and isinstance(e.operand.value, (IntV, RealV)):
                v = e.operand.value
                neg = IntV(-v.i) if isinstance(v, IntV) else RealV(-v.r)
                return self.b.const(name, neg, e.line, e.col, synthesized=not root)
            call = Call(UNARY[e.op], (e.operand,), (), e.line, e.col)
            return self.call(call, name, owner)
        if isinstance(e, Call):
            return self.call(e, name, owner)
        raise CompileError(f"cannot lower {type(e).__name__}")

    def call(self, c: Call, name: str, owner: str, in_trigger: bool = False) -> str:
        if c.callee not in self.reg:
            raise UnknownOperator(f"unknown operator {c.callee!r}", c.line, c.col)
        spec = self.reg.get(c.callee)
        if spec.kind == NodeKind.ACTION and not in_trigger:
            raise CompileError(f"action {c.callee!r} may only appear inside a Trigger block", c.line, c.col)
        try:
            bound = bind_arguments(spec, c.positional, c.named)
        except ArityError as exc:
            raise ArityError(exc.message, c.line, c.col) from None
        inputs, const = [], {}
        for p, arg in bound:
            if p.config:
                const[p.name] = self.config_value(arg, p.name, c)
        # reserve this node's name before its children so numbering is top-down
        for p, arg in bound:
            if not p.config:
                inputs.append((arg,))
        children = []
        for (arg,) in inputs:
            if isinstance(arg, Ref) and arg.name in self.defined:
                children.append(arg.name)
            elif isinstance(arg, Ref) or isinstance(arg, Member):
                children.append(self.lower(arg, "", owner))
            else:
                prefix = "c" if _is_literal(arg) else ""
                children.append(self.lower(arg, self.fresh(owner, prefix), owner))
        return self.b.apply(name, c.callee, children, const, c.line, c.col, synthesized=name != owner)

    def config_value(self, arg: Expr, pname: str, c: Call) -> Value:
        if isinstance(arg, Literal):
            return arg.value
        if isinstance(arg, Unary) and arg.op == "-" and isinstance(arg.operand, Literal):
            v = arg.operand.value
            if isinstance(v, IntV):
                return IntV(-v.i)
            if isinstance(v, RealV):
                return RealV(-v.r)
        if isinstance(arg, Ref) and arg.name in self.defined:
            t = self.b.templates[arg.name]
            while t.op == "id":
                t = self.b.templates[t.inputs[0]]
            if t.op == "const":
                return t.const_args["value"]
        line, col = getattr(arg, "line", c.line), getattr(arg, "col", c.col)
        raise ConfigError(f"{c.callee}(): argument {pname!r} must be a compile-time constant", line, col)


def _is_literal(e: Expr) -> bool:
    return isinstance(e, Literal) or (isinstance(e, Unary) and e.op == "-" and isinstance(e.operand, Literal))


@dataclass
class Namespace:
    """Names produced by lowering: user targets plus synthesized inline nodes."""

    builder: GraphBuilder
    entries: list[str]

    def names(self) -> list[str]:
        return list(self.entries)


def build_namespace(ast: WorkflowAst, registry: Registry | None = None,
                    source_types: Mapping[str, str] | None = None) -> Namespace:
    """Lower every statement into node templates.

    The entry list holds each assignment target and each synthesized
    operator application (``name#k``). Literals, sources and triggers are
    graph nodes but not namespace entries.
    """
    low = _Lowering(GraphBuilder(registry, source_types))
    for st in ast.statements:
        low.statement(st)
    entries = []
    for name, t in low.b.templates.items():
        if t.op in ("source", "time", "trigger") or (t.op == "const" and t.synthesized):
            continue
        if t.kind == NodeKind.ACTION:
            continue
        entries.append(name)
    return Namespace(low.b, entries)


def compile(ast: WorkflowAst, registry: Registry | None = None,
            source_types: Mapping[str, str] | None = None) -> Dag:
    return build_namespace(ast, registry, source_types).builder.build()


def compile_source(source: str, registry: Registry | None = None,
                   source_types: Mapping[str, str] | None = None) -> Dag:
    from .parser import parse_source
    registry = registry if registry is not None else default_registry()
    return compile(parse_source(source, registry.names()), registry, source_types)


# --- DOT export ------------------------------------------------------------------------

SHAPES = {NodeKind.SOURCE: "box", NodeKind.PURE: "ellipse", NodeKind.IMPURE: "diamond",
          NodeKind.ACTION: "doubleoctagon", NodeKind.TRIGGER: "triangle"}


def _dot_label(n: DagNode) -> str:
    if n.op == "const":
        text = f"{n.name}\\n= {_const_text(n.const_args['value'])}"
    elif n.op in ("source", "time", "id", "trigger") or n.op == n.name:
        text = n.name
    else:
        text = f"{n.name}\\n{n.op}"
    return text


def _const_text(v: Value) -> str:
    return json.dumps(describe(v))[1:-1]


def export_dot(dag: Dag) -> str:
    """Graphviz text: shape encodes node kind, global nodes are red."""
    if not dag.nodes:
        return "digraph diva {}\n"
    lines = ["digraph diva {"]
    for n in dag.nodes:
        attrs = [f'label="{_dot_label(n)}"', f"shape={SHAPES[n.kind]}"]
        if n.is_global:
            attrs.append("color=red")
        lines.append(f"  n{n.id} [{', '.join(attrs)}];")
    for n in dag.nodes:
        for i in n.inputs:
            lines.append(f"  n{i} -> n{n.id};")
    for t in dag.triggers:
        for a in t.actions:
            lines.append(f"  n{t.node} -> n{a} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def describe_error(exc: WorkflowError, filename: str) -> str:
    return exc.diagnostic(filename)
