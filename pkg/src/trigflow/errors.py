"""Exception hierarchy shared by the lexer, compiler, runtime and simulator."""

from __future__ import annotations


class WorkflowError(Exception):
    """Base class. Carries an optional source position for diagnostics."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def diagnostic(self, filename: str = "<input>") -> str:
        if self.line is None:
            return f"{filename}: {self.message}"
        return f"{filename}:{self.line}:{self.col}: {self.message}"


# --- front end -------------------------------------------------------------

class LexError(WorkflowError):
    pass


class ParseError(WorkflowError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None,
                 expected: str | None = None):
        super().__init__(message, line, col)
        self.expected = expected


# --- compiler ----------------------------------------------------------------

class CompileError(WorkflowError):
    pass


class UnknownOperator(CompileError):
    pass


class UndefinedName(CompileError):
    pass


class DuplicateName(CompileError):
    pass


class CycleError(CompileError):
    def __init__(self, cycle: list[str]):
        super().__init__("dependency cycle: " + " -> ".join(cycle + cycle[:1]))
        self.cycle = cycle


class SignalTypeError(CompileError):
    """A node's inputs do not match the operator's declared signature."""

    def __init__(self, node: str, expected: str, got: str,
                 line: int | None = None, col: int | None = None):
        super().__init__(f"{node}: expected {expected}, got {got}", line, col)
        self.node = node
        self.expected = expected
        self.got = got


class ArityError(CompileError):
    pass


class ConfigError(CompileError):
    """Invalid compile-time configuration (window sizes, n < 1, ...)."""


# --- registry ----------------------------------------------------------------

class RegistryError(WorkflowError):
    pass


class DuplicateOp(RegistryError):
    pass


class InconsistentFlags(RegistryError):
    pass


# --- runtime -------------------------------------------------------------------

class RuntimeFailure(WorkflowError):
    pass


class TypeMismatch(RuntimeFailure):
    pass


class SourceMissing(RuntimeFailure):
    pass


class DivisionByZero(RuntimeFailure):
    pass


class EmptyInput(RuntimeFailure):
    pass


class IndexOutOfRange(RuntimeFailure):
    pass


class ActionIOError(RuntimeFailure):
    def __init__(self, path: str, cause: BaseException):
        super().__init__(f"cannot write {path}: {cause}")
        self.path = path
        self.cause = cause


class EvalError(RuntimeFailure):
    """An operator failed; wraps the cause with node name, step and rank."""

    def __init__(self, node: str, step: int, rank: int, cause: BaseException):
        super().__init__(f"{node} failed at t={step} on rank {rank}: {cause}")
        self.node = node
        self.step = step
        self.rank = rank
        self.cause = cause


class DesyncError(RuntimeFailure):
    """Ranks disagreed on a collective (or one rank never arrived)."""
