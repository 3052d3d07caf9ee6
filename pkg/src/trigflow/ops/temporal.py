"""Stateful per-step operators: counters, temporal latches and ``window``.

Each operator owns a small state object created per DAG node. The runtime
calls them exactly once per timestep, so the state advances in lock-step
with simulation time.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..errors import ConfigError
from ..values import ANY, ARRAY, BOOL, INT, STR, ArrayV, BoolV, IntV, NodeKind, StrV, Value, as_bool
from .registry import Param, op

IMPURE = NodeKind.IMPURE


@dataclass
class Counter:
    n: int = 0


@dataclass
class Latch:
    on: bool = False


def _positive_n(const):
    if const["n"] < 1:
        raise ConfigError(f"n must be >= 1, got {const['n']}")


def _temporal(name, params=(Param("x", BOOL),), state=Counter, **flags):
    return op(name, kind=IMPURE, params=params, out=BOOL, is_impure=True,
              state_factory=lambda const: state(), **flags)


@op("count", kind=IMPURE, out=INT, is_impure=True, state_factory=lambda const: Counter())
def count(ctx):
    """Number of steps evaluated so far; 1 at the first step."""
    ctx.state.n += 1
    return IntV(ctx.state.n)


@_temporal("until")
def until(ctx, x):
    """True strictly before the first true of ``x``."""
    ctx.state.n += as_bool(x)
    return BoolV(ctx.state.n == 0)


@_temporal("after")
def after(ctx, x):
    """False strictly before the first true of ``x``, true from then on."""
    ctx.state.n += as_bool(x)
    return BoolV(ctx.state.n > 0)


@_temporal("first")
def first(ctx, x):
    """True only at the first step where ``x`` is true."""
    hit = as_bool(x)
    ctx.state.n += hit
    return BoolV(hit and ctx.state.n == 1)


_XN = (Param("x", BOOL), Param("n", INT, config=True))


@_temporal("firstN", params=_XN, check=_positive_n)
def first_n(ctx, x):
    """True at the first ``n`` steps where ``x`` is true."""
    hit = as_bool(x)
    ctx.state.n += hit
    return BoolV(hit and ctx.state.n <= ctx.const["n"])


@_temporal("afterN", params=_XN, check=_positive_n)
def after_n(ctx, x):
    """False until the n-th true of ``x``, true at that step and thereafter."""
    ctx.state.n += as_bool(x)
    return BoolV(ctx.state.n >= ctx.const["n"])


@_temporal("switch", params=(Param("on", BOOL), Param("off", BOOL)), state=Latch)
def switch(ctx, on, off):
    """Latch turned on by ``on`` and off by ``off``; the current state decides
    which input is consulted, so a simultaneous on/off toggles."""
    s = ctx.state
    if not s.on and as_bool(on):
        s.on = True
    elif s.on and as_bool(off):
        s.on = False
    return BoolV(s.on)


@_temporal("countN", params=(Param("since", BOOL), Param("n", INT, config=True)), check=_positive_n)
def count_n(ctx, since):
    """True for ``n`` consecutive steps from each true of ``since``."""
    s = ctx.state
    if as_bool(since):
        s.n = ctx.const["n"]
    active = s.n > 0
    s.n = max(s.n - 1, 0)
    return BoolV(active)


# --- window --------------------------------------------------------------------

SPARSE, CONSECUTIVE = "sparse", "consecutive"


@dataclass
class WindowState:
    mode: str
    max_size: int
    min_size: int
    buf: deque = field(default_factory=deque)
    count: int = 0          # values collected in the current run
    pushes: int = 0
    evictions: int = 0
    cleared: int = 0

    def push(self, v: Value) -> None:
        if len(self.buf) == self.max_size:
            self.buf.popleft()
            self.evictions += 1
        self.buf.append(v)
        self.pushes += 1
        self.count += 1

    def clear(self) -> None:
        self.cleared += len(self.buf)
        self.buf.clear()
        self.count = 0

    def snapshot(self) -> ArrayV:
        pad = max(self.min_size - len(self.buf), 0)
        return ArrayV(list(self.buf) + [None] * pad, [True] * len(self.buf) + [False] * pad)


def window_sizes(const) -> tuple[int, int, str]:
    max_size = const["max_size"]
    min_size = max_size if const.get("min_size") is None else const["min_size"]
    mode = const.get("mode") or SPARSE
    if max_size < 1 or min_size < 1:
        raise ConfigError(f"window sizes must be positive (max_size={max_size}, min_size={min_size})")
    if min_size > max_size:
        raise ConfigError(f"window min_size {min_size} exceeds max_size {max_size}")
    if mode not in (SPARSE, CONSECUTIVE):
        raise ConfigError(f"window mode must be 'sparse' or 'consecutive', got {mode!r}")
    return max_size, min_size, mode


def _new_window(const) -> WindowState:
    max_size, min_size, mode = window_sizes(const)
    return WindowState(mode, max_size, min_size)


@op("window", kind=IMPURE, out=ARRAY, is_impure=True, guarded=True,
    params=(Param("condition", BOOL), Param("field", ANY),
            Param("max_size", INT, config=True), Param("min_size", INT, config=True, default=None),
            Param("mode", STR, config=True, default=StrV(SPARSE))),
    state_factory=_new_window, check=window_sizes)
def window(ctx, condition, value):
    """History of ``value`` at steps where ``condition`` holds, oldest first.

    The result has at least ``min_size`` slots; slots beyond the collected
    values are invalid. ``value`` is only evaluated when the condition is
    true. In consecutive mode a false condition empties the buffer.
    """
    s = ctx.state
    if as_bool(condition):
        s.push(value)
    elif s.mode == CONSECUTIVE:
        s.clear()
    return s.snapshot()
