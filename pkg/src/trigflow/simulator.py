"""Lock-step execution of one engine per simulated rank.

Every rank runs on its own thread. Ranks meet at each collective (the
engine's demand sync, global operators) and at a barrier closing every
step, so a rank that skips a collective the others make is caught at the
next rendezvous rather than deadlocking.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .comm import World
from .compiler import Dag
from .engine import Engine
from .errors import DesyncError, WorkflowError
from .ops.registry import Registry
from .trace import TraceEvent, TraceSink, merge, write_jsonl
from .values import Value

Workload = Callable[[int, int], Mapping[str, Value]]


@dataclass
class RunResult:
    ranks: int
    steps: int
    fired: list[list[list[int]]]                       # [rank][t] -> action ids
    trace: list[TraceEvent]
    engines: list[Engine]
    epochs: list[int]
    watched: dict[str, list[list[Value | None]]] = field(default_factory=dict)   # name -> [rank][t]
    world: World | None = None

    def fired_steps(self, action: str, rank: int) -> list[int]:
        idx = self.engines[rank].dag.by_name[action]
        return [t for t, ids in enumerate(self.fired[rank]) if idx in ids]


def run_lockstep(dag: Dag | Sequence[Dag], workload: Workload, ranks: int, steps: int, *,
                 registry: Registry | None = None, outdir: str | Path | None = None,
                 trace_path: str | Path | None = None, sync_demand: bool | Sequence[bool] = True,
                 eager: bool = False, record_values: bool = False, watch: Sequence[str] = (),
                 timeout: float = 30.0, engine_kwargs: Mapping[str, Any] | None = None) -> RunResult:
    """Run ``ranks`` engines for ``steps`` steps.

    ``dag`` may be a list with one DAG per rank (used to test the workflow
    fingerprint check). ``sync_demand`` may likewise be given per rank. With
    an ``outdir``, rank ``r`` writes its action outputs under ``outdir/rank{r}``.
    """
    if ranks < 1 or steps < 1:
        raise ValueError("ranks and steps must be at least 1")
    dags = list(dag) if isinstance(dag, (list, tuple)) else [dag] * ranks
    syncs = list(sync_demand) if isinstance(sync_demand, (list, tuple)) else [sync_demand] * ranks
    world = World(ranks, dags[0].fingerprint, timeout)
    engines = []
    for r in range(ranks):
        rank_dir = Path(outdir) / f"rank{r}" if outdir is not None else None
        eng = Engine(dags[r], registry.copy() if registry is not None else None,
                     world.comm(r, dags[r].fingerprint), TraceSink(), rank_dir, sync_demand=syncs[r],
                     eager=eager, record_values=record_values, **dict(engine_kwargs or {}))
        engines.append(eng)
    fired: list[list[list[int]]] = [[] for _ in range(ranks)]
    watched = {name: [[] for _ in range(ranks)] for name in watch}
    errors: list[tuple[int, BaseException] | None] = [None] * ranks

    def worker(r: int) -> None:
        eng = engines[r]
        ids = {name: eng.dag.by_name[name] for name in watch}
        try:
            for t in range(steps):
                fired[r].append(eng.step(workload(t, r)))
                for name, i in ids.items():
                    watched[name][r].append(eng._memo.get(i))
                eng.comm.barrier()
        except BaseException as exc:   # noqa: BLE001  (reported by the caller)
            errors[r] = (r, exc)
            if not isinstance(exc, DesyncError):
                world.abort(f"rank {r} failed: {exc}")
        finally:
            eng.comm.leave()

    threads = [threading.Thread(target=worker, args=(r,), name=f"rank{r}") for r in range(ranks)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()

    trace = merge(e.trace.events for e in engines)
    if trace_path is not None:
        write_jsonl(trace, trace_path)
    failures = [e for e in errors if e is not None]
    if failures:
        # prefer the root cause over the desyncs it provoked on other ranks
        rank, exc = next((f for f in failures if not isinstance(f[1], DesyncError)), failures[0])
        if isinstance(exc, WorkflowError) and not isinstance(exc, DesyncError):
            exc.args = (f"rank {rank}: {exc.args[0] if exc.args else exc}",)
        exc.trace = trace
        raise exc
    return RunResult(ranks, steps, fired, trace, engines, [e.comm.epoch for e in engines], watched, world)


def run_eager_oracle(dag: Dag, source_trace: Workload, ranks: int, steps: int,
                     registry: Registry | None = None,
                     engine_kwargs: Mapping[str, Any] | None = None) -> dict[tuple[int, int, str], Value]:
    """Reference semantics: every node on every rank at every step.

    Returns ``(t, rank, node name) -> value`` for each node that produced a
    value (nodes whose operator failed, and were never needed, are absent).
    """
    res = run_lockstep(dag, source_trace, ranks, steps, registry=registry, eager=True,
                       engine_kwargs=engine_kwargs,
                       watch=[n.name for n in dag.nodes if n.kind.value not in ("Action", "Trigger")])
    out: dict[tuple[int, int, str], Value] = {}
    for name, per_rank in res.watched.items():
        for r, values in enumerate(per_rank):
            for t, v in enumerate(values):
                if isinstance(v, Value):
                    out[(t, r, name)] = v
    return out
