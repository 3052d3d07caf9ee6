"""Operator specifications and the name -> operator registry.

An operator is described by an :class:`OpSpec`: its kind in the node
taxonomy, its parameters (signal inputs vs. compile-time configuration),
its output type, and the Python callable implementing it. Operator bodies
are called as ``fn(ctx, *inputs)`` where ``ctx`` is an :class:`OpContext`.
"""

from __future__ import annotations

import importlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence, TextIO

from ..errors import ArityError, DuplicateOp, InconsistentFlags, UnknownOperator
from ..values import ANY, NodeKind, Value, describe_type

_MISSING = object()


@dataclass(frozen=True)
class Param:
    name: str
    type: Any = ANY
    config: bool = False       # compile-time constant, lands in DagNode.const_args
    default: Any = _MISSING    # a Value, for optional params
    variadic: bool = False

    @property
    def required(self) -> bool:
        return self.default is _MISSING and not self.variadic


@dataclass
class OpContext:
    """Everything an operator body may touch besides its inputs."""

    node: str
    step: int
    rank: int
    const: dict[str, Any]
    state: Any = None
    comm: Any = None             # only set for global operators
    outdir: Path | None = None
    input_names: tuple[str, ...] = ()
    stdout: TextIO | None = None


@dataclass
class OpSpec:
    name: str
    kind: NodeKind
    params: tuple[Param, ...]
    out_type: Any                 # type tag, or callable(in_types, const) -> tag | None
    eval: Callable[..., Value | None]
    is_global: bool = False
    is_impure: bool = False
    uses_comm: bool = False
    state_factory: Callable[[dict[str, Any]], Any] | None = None
    check: Callable[[dict[str, Any]], None] | None = None
    short_circuit: str | None = None   # "and" | "or"
    guarded: bool = False              # input 0 gates evaluation of the remaining inputs
    doc: str = ""

    @property
    def signal_params(self) -> tuple[Param, ...]:
        return tuple(p for p in self.params if not p.config)

    @property
    def config_params(self) -> tuple[Param, ...]:
        return tuple(p for p in self.params if p.config)

    def signature(self) -> str:
        parts = []
        for p in self.params:
            text = f"{p.name}: {describe_type(p.type)}"
            if p.variadic:
                text = "*" + text
            elif not p.required:
                text += " = ..."
            parts.append(text)
        return f"{self.name}({', '.join(parts)})"

    def result_type(self, in_types: Sequence[str], const: dict[str, Any]) -> str | None:
        if callable(self.out_type):
            return self.out_type(list(in_types), const)
        return self.out_type


def bind_arguments(spec: OpSpec, positional: Sequence[Any], named: Sequence[tuple[str, Any]]
                   ) -> list[tuple[Param, Any]]:
    """Match call arguments to parameters.

    Returns ``(param, argument)`` pairs in parameter order; a variadic
    parameter contributes one pair per absorbed argument. Optional params
    that were not supplied are omitted.
    """
    params = spec.params
    named_map = dict(named)
    for key in named_map:
        if not any(p.name == key for p in params):
            raise ArityError(f"{spec.name}() has no parameter {key!r}")
    var_index = next((i for i, p in enumerate(params) if p.variadic), None)
    pos = list(positional)
    bound: list[tuple[Param, Any]] = []

    if var_index is None:
        slots = [p for p in params if p.name not in named_map]
        if len(pos) > len(slots):
            raise ArityError(f"{spec.name}() takes at most {len(slots)} positional arguments, got {len(pos)}")
        given = dict(zip((p.name for p in slots), pos))
        given.update(named_map)
        for p in params:
            if p.name in given:
                bound.append((p, given[p.name]))
            elif p.required:
                raise ArityError(f"{spec.name}() missing argument {p.name!r}")
        return bound

    before = [p for p in params[:var_index] if p.name not in named_map]
    after = [p for p in params[var_index + 1:] if p.name not in named_map]
    if len(pos) < len(before):
        missing = before[len(pos)].name
        raise ArityError(f"{spec.name}() missing argument {missing!r}")
    head, rest = pos[:len(before)], pos[len(before):]
    # trailing params are filled from the end of the positional list,
    # but only the required ones (optional ones must be named)
    n_tail = sum(1 for p in after if p.required)
    if len(rest) < n_tail:
        raise ArityError(f"{spec.name}() missing argument {after[len(rest)].name!r}")
    middle, tail = (rest[:len(rest) - n_tail], rest[len(rest) - n_tail:]) if n_tail else (rest, [])
    given = dict(zip((p.name for p in before), head))
    given.update(zip((p.name for p in after if p.required), tail))
    given.update(named_map)
    for i, p in enumerate(params):
        if i == var_index:
            bound.extend((p, a) for a in middle)
        elif p.name in given:
            bound.append((p, given[p.name]))
        elif p.required:
            raise ArityError(f"{spec.name}() missing argument {p.name!r}")
    return bound


class Registry:
    """Maps operator names to specs. Mutable until handed to an engine."""

    def __init__(self, specs: Iterable[OpSpec] = ()):
        self._ops: dict[str, OpSpec] = {}
        for spec in specs:
            self.register(spec)

    def register(self, spec: OpSpec) -> None:
        if spec.name in self._ops:
            raise DuplicateOp(f"operator {spec.name!r} is already registered")
        _check_flags(spec)
        self._ops[spec.name] = spec

    def get(self, name: str) -> OpSpec:
        try:
            return self._ops[name]
        except KeyError:
            raise UnknownOperator(f"unknown operator {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._ops

    def names(self) -> frozenset[str]:
        return frozenset(self._ops)

    def copy(self) -> "Registry":
        reg = Registry()
        reg._ops = dict(self._ops)
        return reg

    def override(self, name: str, fn: Callable[..., Value | None]) -> None:
        """Swap an operator body, keeping its signature and flags."""
        self._ops[name] = replace(self.get(name), eval=fn)

    def load_overrides(self, path: str | Path) -> list[str]:
        """Re-read a JSON mapping ``{"op": "module:function"}`` and apply it.

        Modules are reloaded so edited code takes effect without a restart.
        """
        mapping = json.loads(Path(path).read_text())
        applied = []
        for name, target in sorted(mapping.items()):
            module_name, _, attr = target.partition(":")
            module = importlib.import_module(module_name)
            if not module_name.startswith("trigflow."):
                # builtin modules register on import; reloading them would duplicate specs
                module = importlib.reload(module)
            self.override(name, getattr(module, attr))
            applied.append(name)
        return applied


def _check_flags(spec: OpSpec) -> None:
    if spec.is_global != spec.uses_comm:
        raise InconsistentFlags(f"{spec.name}: global operators (and only those) receive the communicator")
    if spec.is_impure and spec.state_factory is None:
        raise InconsistentFlags(f"{spec.name}: impure operators need a state_factory")
    if spec.is_impure != (spec.kind == NodeKind.IMPURE):
        raise InconsistentFlags(f"{spec.name}: is_impure must match kind ImpureFn")
    if spec.kind in (NodeKind.SOURCE, NodeKind.TRIGGER):
        raise InconsistentFlags(f"{spec.name}: sources and triggers are structural, not registrable")
    if spec.short_circuit and len(spec.signal_params) != 2:
        raise InconsistentFlags(f"{spec.name}: short-circuit operators take exactly two inputs")
    if sum(p.variadic for p in spec.params) > 1:
        raise InconsistentFlags(f"{spec.name}: at most one variadic parameter")


def register_op(registry: Registry, spec: OpSpec) -> None:
    registry.register(spec)


# Builtin modules append their specs here through the ``op`` decorator.
BUILTINS: list[OpSpec] = []


def op(name: str, kind: NodeKind = NodeKind.PURE, params: Sequence[Param] = (), out: Any = ANY,
       **flags) -> Callable:
    def decorate(fn):
        BUILTINS.append(OpSpec(name=name, kind=kind, params=tuple(params), out_type=out, eval=fn,
                               doc=(fn.__doc__ or "").strip(), **flags))
        return fn
    return decorate
