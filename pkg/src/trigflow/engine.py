"""Per-rank workflow execution.

Each call to :meth:`Engine.step` runs one timestep in four passes:

1. reload hook: re-read operator overrides when a reload is due;
2. every impure node is evaluated, in topological order, exactly once;
3. trigger predicates are evaluated; the inputs of fired actions form the
   demand set, which is OR-synchronised across ranks for global nodes and
   then evaluated in topological order; the fired actions run;
4. (implicit) every evaluation goes through the version-stamped cache.

Evaluation is pull-based and memoised per step, so a node computes at most
once per step. A pure node is recomputed only if one of its inputs changed
version since the last computation. Versions bump only when a recomputed
value differs from the previous one.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, TextIO

from .comm import Communicator, LocalComm
from .compiler import Dag, DagNode
from .errors import DesyncError, EvalError, SourceMissing
from .ops import default_registry
from .ops.registry import OpContext, Registry
from .trace import TraceEvent, TraceSink
from .values import BoolV, IntV, NodeKind, Value, as_bool, to_json, value_eq


@dataclass
class CacheEntry:
    value: Value
    own_version: int
    input_versions: tuple[int, ...]


class _Failed:
    """Placeholder for a node whose operator raised (eager oracle only)."""

    def __init__(self, error: BaseException):
        self.error = error


class Engine:
    def __init__(self, dag: Dag, registry: Registry | None = None, comm: Communicator | None = None,
                 trace: TraceSink | None = None, outdir: str | Path | None = None, *,
                 sync_demand: bool = True, eager: bool = False, reload_every: int = 0,
                 overrides: str | Path | None = None, record_values: bool = False,
                 stdout: TextIO | None = None):
        self.dag = dag
        self.registry = registry if registry is not None else default_registry()
        self.comm = comm if comm is not None else LocalComm()
        self.trace = trace if trace is not None else TraceSink()
        self.outdir = Path(outdir) if outdir is not None else None
        self.sync_demand = sync_demand
        self.eager = eager
        self.reload_every = reload_every
        self.overrides = overrides
        self.record_values = record_values
        self.stdout = stdout
        self.t = -1
        self.cache: dict[int, CacheEntry] = {}
        self.version = [0] * len(dag.nodes)
        self.states: dict[int, Any] = {}
        self.configs = [n.config() for n in dag.nodes]
        self.specs = [None if n.op in ("source", "time", "const", "id", "trigger") else self.registry.get(n.op)
                      for n in dag.nodes]
        for n in dag.nodes:
            spec = self.specs[n.id]
            if spec is not None and spec.state_factory is not None:
                self.states[n.id] = spec.state_factory(self.configs[n.id])
        self.global_ids = [n.id for n in dag.nodes if n.is_global and n.kind not in
                           (NodeKind.ACTION, NodeKind.TRIGGER)]
        self.input_names = [tuple(dag.nodes[i].name for i in n.inputs) for n in dag.nodes]
        self._seq = 0
        self._rank = self.comm.rank
        self._contexts: dict[int, OpContext] = {}
        self._memo: dict[int, Any] = {}
        self._sources: Mapping[str, Value] = {}
        self.last_values: dict[int, Value] = {}

    @property
    def rank(self) -> int:
        return self.comm.rank

    # --- tracing -------------------------------------------------------------------

    def emit(self, node: str, ev: str, value: Value | None = None) -> None:
        val = to_json(value, compact_fields=True) if (self.record_values and value is not None) else None
        self._seq += 1
        self.trace.emit(TraceEvent(self.t, self._rank, node, ev, self.comm.epoch, self._seq, val))

    # --- the step ---------------------------------------------------------------------

    def step(self, sources: Mapping[str, Value]) -> list[int]:
        """Run one timestep; returns the ids of actions fired on this rank."""
        self.t += 1
        self._memo = {}
        self._sources = sources
        try:
            if self.eager:
                return self._eager_step()
            self._reload_hook()
            for i in self.dag.impure_order:
                self.evaluate_node(i)
            fired: list[int] = []
            for trig in self.dag.triggers:
                if as_bool(self.evaluate_node(trig.predicate)):
                    fired.extend(trig.actions)
                else:
                    for a in trig.actions:
                        self.emit(self.dag.nodes[a].name, "action_skip")
            demand = self._demand_closure(fired)
            if self.sync_demand:
                demand = self.sync_global_demand(demand)
            for i in self.dag.topo_order:
                if i in demand and self.dag.nodes[i].kind not in (NodeKind.ACTION, NodeKind.TRIGGER):
                    self.evaluate_node(i)
            for a in fired:
                self._run_action(a)
            return fired
        finally:
            self.trace.flush()

    def _reload_hook(self) -> None:
        if self.reload_every and self.overrides and self.t > 0 and self.t % self.reload_every == 0:
            self.registry.load_overrides(self.overrides)
            self.specs = [None if s is None else self.registry.get(s.name) for s in self.specs]

    # --- demand --------------------------------------------------------------------------

    def _lazy_inputs(self, n: DagNode) -> tuple[int, ...]:
        """Inputs that are needed whenever ``n`` is; conditional ones are excluded."""
        spec = self.specs[n.id]
        if spec is not None and (spec.short_circuit or spec.guarded):
            return n.inputs[:1]
        return n.inputs

    def _demand_closure(self, seeds) -> set[int]:
        demand: set[int] = set()
        stack = []
        for a in seeds:
            stack.extend(self.dag.nodes[a].inputs)
        while stack:
            i = stack.pop()
            if i in demand:
                continue
            demand.add(i)
            n = self.dag.nodes[i]
            if n.is_impure:
                continue   # already evaluated in pass 2
            stack.extend(self._lazy_inputs(n))
        return demand

    def sync_global_demand(self, demand: set[int]) -> set[int]:
        """OR the demand flags of global nodes across ranks, then re-close."""
        if not self.global_ids:
            return demand
        bits = [g in demand for g in self.global_ids]
        merged = self.comm.allreduce(bits, "or")
        self.emit("<demand>", "global_sync")
        extra = [g for g, on in zip(self.global_ids, merged) if on and g not in demand]
        if not extra:
            return demand
        out = set(demand)
        stack = list(extra)
        while stack:
            i = stack.pop()
            if i in out:
                continue
            out.add(i)
            n = self.dag.nodes[i]
            if not n.is_impure:
                stack.extend(self._lazy_inputs(n))
        return out

    # --- evaluation ------------------------------------------------------------------------

    def evaluate_node(self, i: int) -> Value:
        if i in self._memo:
            return self._memo[i]
        n = self.dag.nodes[i]
        if n.kind == NodeKind.SOURCE:
            value = self._read_source(n)
            self._store(n, value, ())
            self.emit(n.name, "evaluate", value)
            self._memo[i] = value
            return value
        spec = self.specs[i]
        if spec is not None and spec.short_circuit:
            return self.evaluate_bool_shortcircuit(i)
        if spec is not None and spec.guarded:
            args = self._guarded_inputs(n)
        else:
            args = [self.evaluate_node(j) for j in n.inputs]
        in_versions = tuple(self.version[j] for j in n.inputs)
        entry = self.cache.get(i)
        if (entry is not None and not n.is_impure and not n.is_global
                and entry.input_versions == in_versions):
            self.emit(n.name, "cache_hit", entry.value)
            self._memo[i] = entry.value
            return entry.value
        value = self._apply(n, args)
        self._store(n, value, in_versions)
        self.emit(n.name, "evaluate", value)
        self._memo[i] = value
        return value

    def evaluate_bool_shortcircuit(self, i: int) -> Value:
        """``&&`` / ``||`` that skips its right operand when the left decides.

        If the right operand is global, whether it is needed is OR-reduced
        across ranks so that either every rank evaluates it or none does.
        """
        if i in self._memo:
            return self._memo[i]
        n = self.dag.nodes[i]
        kind = self.specs[i].short_circuit
        lhs_id, rhs_id = n.inputs
        lhs = as_bool(self.evaluate_node(lhs_id))
        decided = (not lhs) if kind == "and" else lhs
        need = not decided
        rhs_node = self.dag.nodes[rhs_id]
        if rhs_node.is_global:
            need = self.comm.allreduce([need], "or")[0]
            self.emit(n.name, "global_sync")
        if need:
            rhs = as_bool(self.evaluate_node(rhs_id))
        elif rhs_id not in self._memo:
            self.emit(rhs_node.name, "skip")
        if decided:
            value = BoolV(lhs)
        else:
            value = BoolV(rhs)
        self._store(n, value, tuple(self.version[j] for j in n.inputs))
        self.emit(n.name, "evaluate", value)
        self._memo[i] = value
        return value

    def _guarded_inputs(self, n: DagNode) -> list[Value | None]:
        guard = self.evaluate_node(n.inputs[0])
        need = as_bool(guard)
        gated = n.inputs[1:]
        if any(self.dag.nodes[j].is_global for j in gated):
            need = self.comm.allreduce([need], "or")[0]
            self.emit(n.name, "global_sync")
        if need:
            return [guard] + [self.evaluate_node(j) for j in gated]
        for j in gated:
            if j not in self._memo:
                self.emit(self.dag.nodes[j].name, "skip")
        return [guard] + [None] * len(gated)

    def _read_source(self, n: DagNode) -> Value:
        if n.op == "time":
            return IntV(self.t)
        key = n.name[len("data."):]
        if key in self._sources:
            return self._sources[key]
        if n.name in self._sources:
            return self._sources[n.name]
        raise SourceMissing(f"no value supplied for source {n.name!r} at t={self.t}", n.line, n.col)

    def _store(self, n: DagNode, value: Value, in_versions: tuple[int, ...]) -> None:
        entry = self.cache.get(n.id)
        if entry is None or not _same(entry.value, value):
            self.version[n.id] += 1
        self.cache[n.id] = CacheEntry(value, self.version[n.id], in_versions)
        self.last_values[n.id] = value

    def _context(self, n: DagNode) -> OpContext:
        # one context per node, reused across steps; operators see the current step
        ctx = self._contexts.get(n.id)
        if ctx is None:
            ctx = self._contexts[n.id] = OpContext(
                node=n.name, step=self.t, rank=self._rank, const=self.configs[n.id],
                state=self.states.get(n.id), comm=self.comm if self.specs[n.id].uses_comm else None,
                outdir=self.outdir, input_names=self.input_names[n.id], stdout=self.stdout)
        ctx.step = self.t
        return ctx

    def _apply(self, n: DagNode, args: list) -> Value:
        if n.op == "const":
            return n.const_args["value"]
        if n.op == "id":
            return args[0]
        spec = self.specs[n.id]
        try:
            return spec.eval(self._context(n), *args)
        except (EvalError, DesyncError):
            raise
        except Exception as exc:
            raise EvalError(n.name, self.t, self.rank, exc) from exc

    def _run_action(self, a: int) -> None:
        n = self.dag.nodes[a]
        args = [self.evaluate_node(j) for j in n.inputs]
        self._apply(n, args)
        self.emit(n.name, "action_fire")

    # --- eager reference semantics -------------------------------------------------------

    def _eager_step(self) -> list[int]:
        """Evaluate every node in topological order, with no caching or skipping.

        A node whose operator fails is marked failed; the failure only
        propagates to consumers that actually need that input, and is raised
        if a fired action needs it.
        """
        memo: dict[int, Any] = {}
        for i in self.dag.topo_order:
            n = self.dag.nodes[i]
            if n.kind in (NodeKind.ACTION, NodeKind.TRIGGER):
                continue
            memo[i] = self._eager_node(n, memo)
            if not isinstance(memo[i], _Failed):
                self.emit(n.name, "evaluate", memo[i])
                self.last_values[i] = memo[i]
            else:
                self.emit(n.name, "skip")
        fired = []
        for trig in self.dag.triggers:
            pred = memo[trig.predicate]
            if isinstance(pred, _Failed):
                raise pred.error
            if as_bool(pred):
                fired.extend(trig.actions)
            else:
                for a in trig.actions:
                    self.emit(self.dag.nodes[a].name, "action_skip")
        for a in fired:
            n = self.dag.nodes[a]
            args = [memo[j] for j in n.inputs]
            for v in args:
                if isinstance(v, _Failed):
                    raise v.error
            self._apply(n, args)
            self.emit(n.name, "action_fire")
        self._memo = memo
        return fired

    def _eager_node(self, n: DagNode, memo: dict[int, Any]):
        if n.kind == NodeKind.SOURCE:
            return self._read_source(n)
        args = [memo[j] for j in n.inputs]
        spec = self.specs[n.id]
        if spec is not None and spec.short_circuit:
            lhs = args[0]
            if isinstance(lhs, _Failed):
                return lhs
            if as_bool(lhs) == (spec.short_circuit == "or"):
                return BoolV(as_bool(lhs))
            return args[1] if isinstance(args[1], _Failed) else BoolV(as_bool(args[1]))
        if spec is not None and spec.guarded and not isinstance(args[0], _Failed) and not as_bool(args[0]):
            args = [args[0]] + [None] * (len(args) - 1)
        failed = next((a for a in args if isinstance(a, _Failed)), None)
        if failed is not None:
            if n.is_global:
                raise failed.error
            if n.is_impure:
                raise failed.error
            return failed
        try:
            return self._apply(n, args)
        except EvalError as exc:
            if n.is_global or n.is_impure:
                raise
            return _Failed(exc)


def _same(a: Value, b: Value) -> bool:
    return type(a) is type(b) and value_eq(a, b)


def run_single(dag: Dag, workload, steps: int, **engine_kwargs) -> Engine:
    """Drive one engine (rank 0 of 1) for ``steps`` steps."""
    eng = Engine(dag, **engine_kwargs)
    for t in range(steps):
        eng.step(workload(t, 0))
    return eng


def default_stdout() -> TextIO:
    return sys.stdout
