"""Trigger-driven lazy dataflow workflows for in situ analysis."""

from .compiler import Dag, GraphBuilder, compile, compile_source, export_dot
from .engine import Engine, run_single
from .errors import WorkflowError
from .harness import run_case_study
from .ops import default_registry
from .parser import parse_source
from .simulator import run_eager_oracle, run_lockstep
from .toysim import ToyIgnitionConfig, toy_sim_step

__version__ = "0.1.0"

__all__ = [
    "Dag", "Engine", "GraphBuilder", "ToyIgnitionConfig", "WorkflowError", "compile", "compile_source",
    "default_registry", "export_dot", "parse_source", "run_case_study", "run_eager_oracle",
    "run_lockstep", "run_single", "toy_sim_step",
]
