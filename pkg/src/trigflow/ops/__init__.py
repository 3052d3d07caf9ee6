"""Builtin operator library and the registry that exposes it to the DSL."""

from . import actions, arrays, reduce, scalar, temporal  # noqa: F401  (registration side effects)
from .registry import BUILTINS, OpContext, OpSpec, Param, Registry, bind_arguments, register_op


def default_registry() -> Registry:
    """A fresh registry holding every builtin operator."""
    return Registry(BUILTINS)


__all__ = ["OpContext", "OpSpec", "Param", "Registry", "bind_arguments", "default_registry", "register_op"]
