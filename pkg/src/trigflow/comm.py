"""Collective communication between simulated ranks.

A :class:`World` is a rendezvous point shared by ``size`` rank threads. Each
rank holds a :class:`Communicator` whose collectives block until every rank
has made the same call (same epoch, operation, payload length and tag).
Anything else is a desynchronisation and fails fast with
:class:`DesyncError` instead of hanging.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from typing import Sequence

from .errors import DesyncError

REDUCERS = {
    "sum": lambda xs: sum(xs[1:], xs[0]),
    "min": min,
    "max": max,
    "or": any,
    "and": all,
}


def reduce_payloads(op: str, payloads: Sequence[Sequence]) -> list:
    """Elementwise reduction, combining ranks in ascending order.

    Numbers keep their Python type, so integer payloads reduce exactly.
    """
    if op not in REDUCERS:
        raise ValueError(f"unknown reduction {op!r}")
    fn = REDUCERS[op]
    out = []
    for column in zip(*payloads):
        if op in ("or", "and"):
            out.append(bool(fn(bool(x) for x in column)))
        else:
            out.append(fn(list(column)))
    return out


@dataclass
class CollectiveRecord:
    epoch: int
    op: str
    length: int
    tag: str
    payloads: dict[int, list] = field(default_factory=dict)
    result: list | None = None

    @property
    def participants(self) -> set[int]:
        return set(self.payloads)

    def fingerprint(self) -> str:
        return hashlib.sha256(f"{self.op}:{self.length}:{self.tag}".encode()).hexdigest()[:16]


class Communicator:
    """Interface seen by global operators and the engine."""

    rank: int = 0
    size: int = 1
    epoch: int = 0

    def allreduce(self, payload: Sequence, op: str) -> list:
        raise NotImplementedError

    def barrier(self) -> None:
        raise NotImplementedError


class LocalComm(Communicator):
    """Single-rank communicator; collectives are identities."""

    def __init__(self):
        self.rank, self.size, self.epoch = 0, 1, 0

    def allreduce(self, payload: Sequence, op: str) -> list:
        self.epoch += 1
        return reduce_payloads(op, [list(payload)])

    def barrier(self) -> None:
        self.epoch += 1


class World:
    """Rendezvous shared by all rank threads of one run."""

    def __init__(self, size: int, tag: str = "", timeout: float = 30.0):
        if size < 1:
            raise ValueError("a world needs at least one rank")
        self.size = size
        self.tag = tag
        self.timeout = timeout
        self.records: dict[int, CollectiveRecord] = {}
        self.finished: dict[int, int] = {}     # rank -> epoch at which it left
        self.failure: DesyncError | None = None
        self._cond = threading.Condition()

    def comm(self, rank: int, tag: str | None = None) -> "RankComm":
        return RankComm(self, rank, tag)

    def abort(self, reason: str) -> None:
        with self._cond:
            if self.failure is None:
                self.failure = DesyncError(reason)
            self._cond.notify_all()

    def leave(self, rank: int, epoch: int) -> None:
        """A rank has stopped issuing collectives."""
        with self._cond:
            self.finished[rank] = epoch
            for rec in self.records.values():
                if rec.result is None and rank not in rec.payloads and epoch <= rec.epoch:
                    waiting = sorted(rec.payloads)
                    self._fail(f"rank {rank} left while ranks {waiting} wait in {rec.op} (epoch {rec.epoch})")
            self._cond.notify_all()

    def _fail(self, reason: str) -> DesyncError:
        if self.failure is None:
            self.failure = DesyncError(reason)
        self._cond.notify_all()
        return self.failure

    def collective(self, rank: int, epoch: int, op: str, payload: Sequence, tag: str) -> list:
        payload = list(payload)
        with self._cond:
            if self.failure is not None:
                raise self.failure
            rec = self.records.get(epoch)
            if rec is None:
                rec = self.records[epoch] = CollectiveRecord(epoch, op, len(payload), tag)
                for r, left_at in self.finished.items():
                    if left_at <= epoch:
                        raise self._fail(f"rank {rank} entered {op} (epoch {epoch}) but rank {r} has left")
            elif (rec.op, rec.length, rec.tag) != (op, len(payload), tag):
                others = sorted(rec.payloads)
                raise self._fail(
                    f"collective mismatch at epoch {epoch}: rank {rank} called {op}[{len(payload)}] "
                    f"while ranks {others} called {rec.op}[{rec.length}]"
                    + ("" if rec.tag == tag else " (different workflow fingerprint)"))
            rec.payloads[rank] = payload
            if len(rec.payloads) == self.size:
                ordered = [rec.payloads[r] for r in range(self.size)]
                rec.result = [] if op == "barrier" else reduce_payloads(op, ordered)
                self._cond.notify_all()
            ok = self._cond.wait_for(lambda: rec.result is not None or self.failure is not None,
                                     timeout=self.timeout)
            if self.failure is not None and rec.result is None:
                raise self.failure
            if not ok:
                missing = sorted(set(range(self.size)) - rec.participants)
                raise self._fail(f"timeout in {op} (epoch {epoch}): ranks {missing} never arrived")
            return list(rec.result)

    def completed(self) -> list[CollectiveRecord]:
        return [self.records[e] for e in sorted(self.records) if self.records[e].result is not None]


class RankComm(Communicator):
    def __init__(self, world: World, rank: int, tag: str | None = None):
        self.world = world
        self.rank = rank
        self.size = world.size
        self.epoch = 0
        self.tag = world.tag if tag is None else tag

    def allreduce(self, payload: Sequence, op: str) -> list:
        if op not in REDUCERS:
            raise ValueError(f"unknown reduction {op!r}")
        result = self.world.collective(self.rank, self.epoch, op, payload, self.tag)
        self.epoch += 1
        return result

    def barrier(self) -> None:
        self.world.collective(self.rank, self.epoch, "barrier", [], self.tag)
        self.epoch += 1

    def leave(self) -> None:
        self.world.leave(self.rank, self.epoch)
