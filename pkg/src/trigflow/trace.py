"""Per-node execution events and their JSON-lines log."""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path
from typing import IO, Any, Iterable, NamedTuple

EVENTS = ("evaluate", "cache_hit", "skip", "action_fire", "action_skip", "global_sync")


class TraceEvent(NamedTuple):
    t: int
    rank: int
    node: str
    ev: str
    epoch: int = 0
    seq: int = 0
    val: Any = None     # JSON value encoding, when value recording is on

    def to_dict(self) -> dict:
        d = {"t": self.t, "rank": self.rank, "node": self.node, "ev": self.ev, "epoch": self.epoch,
             "seq": self.seq}
        if self.val is not None:
            d["val"] = self.val
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEvent":
        return cls(d["t"], d["rank"], d["node"], d["ev"], d.get("epoch", 0), d.get("seq", 0), d.get("val"))


class TraceSink:
    """Collects events in memory and optionally streams them as JSON lines.

    ``flush`` is called by the engine at the end of every step.
    """

    def __init__(self, path: str | Path | None = None, keep: bool = True):
        self.events: list[TraceEvent] = []
        self.keep = keep
        self._fh: IO[str] | None = open(path, "w", encoding="utf-8") if path else None
        self._pending: list[TraceEvent] = []

    def emit(self, event: TraceEvent) -> None:
        if self.keep:
            self.events.append(event)
        if self._fh is not None:
            self._pending.append(event)

    def flush(self) -> None:
        if self._fh is None:
            return
        for e in self._pending:
            self._fh.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")
        self._pending.clear()
        self._fh.flush()

    def close(self) -> None:
        self.flush()
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def merge(per_rank: Iterable[Iterable[TraceEvent]]) -> list[TraceEvent]:
    """One trace ordered by (t, epoch, rank), keeping each rank's own order."""
    tagged = [e for events in per_rank for e in events]
    return sorted(tagged, key=lambda e: (e.t, e.epoch, e.rank, e.seq))


def write_jsonl(events: Iterable[TraceEvent], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[TraceEvent]:
    with open(path, encoding="utf-8") as fh:
        return [TraceEvent.from_dict(json.loads(line)) for line in fh if line.strip()]


def count(events: Iterable[TraceEvent], node: str | None = None, ev: str = "evaluate",
          rank: int | None = None) -> int:
    return sum(1 for e in events if e.ev == ev and (node is None or e.node == node)
               and (rank is None or e.rank == rank))


def eval_counts(events: Iterable[TraceEvent]) -> dict[str, int]:
    c = Counter(e.node for e in events if e.ev == "evaluate")
    return dict(sorted(c.items()))


def value_diff(lazy: Iterable[TraceEvent], eager: Iterable[TraceEvent]) -> list[str]:
    """Mismatches between values the lazy run computed and the eager run's.

    Every ``evaluate``/``cache_hit`` event carrying a value in ``lazy`` must
    be matched by an event with an equal value at the same (t, rank, node)
    in ``eager``. Fired actions must agree in both directions.
    """
    reference: dict[tuple[int, int, str], Any] = {}
    eager_fired = set()
    for e in eager:
        if e.ev == "evaluate":
            reference[(e.t, e.rank, e.node)] = e.val
        elif e.ev == "action_fire":
            eager_fired.add((e.t, e.rank, e.node))
    problems = []
    lazy_fired = set()
    for e in lazy:
        key = (e.t, e.rank, e.node)
        if e.ev == "action_fire":
            lazy_fired.add(key)
        if e.ev not in ("evaluate", "cache_hit") or e.val is None:
            continue
        if key not in reference:
            problems.append(f"t={e.t} rank={e.rank} {e.node}: missing from reference trace")
        elif reference[key] != e.val:
            problems.append(f"t={e.t} rank={e.rank} {e.node}: {e.val} != {reference[key]}")
    for key in sorted(lazy_fired ^ eager_fired):
        problems.append(f"t={key[0]} rank={key[1]} {key[2]}: fired in only one run")
    return problems
