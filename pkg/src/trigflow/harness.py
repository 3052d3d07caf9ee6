"""End-to-end auto-ignition case study on the toy simulation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .compiler import Dag, compile_source
from .simulator import RunResult, run_lockstep
from .toysim import ToyIgnitionConfig, workload
from .trace import eval_counts
from .values import BoolV

WATCH = ("wait", "valid", "anomaly", "pre_anomaly", "post_anomaly")


def workflow_source(name: str) -> str:
    """Text of a bundled ``.diva`` workflow."""
    return resources.files("trigflow.workflows").joinpath(f"{name}.diva").read_text(encoding="utf-8")


def bundled_workflows() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("trigflow.workflows").iterdir()
                  if p.name.endswith(".diva"))


def case_study_workflow() -> str:
    return workflow_source("case_study")


def case_study_dag() -> Dag:
    return compile_source(case_study_workflow())


@dataclass
class CaseResult:
    config: ToyIgnitionConfig
    run: RunResult
    steps_true: dict[str, list[list[int]]] = field(default_factory=dict)   # signal -> [rank] -> steps

    def anomaly_steps(self) -> list[tuple[int, int]]:
        return [(r, t) for r, ts in enumerate(self.steps_true["anomaly"]) for t in ts]

    @property
    def anomaly_step(self) -> int | None:
        found = self.anomaly_steps()
        return found[0][1] if found else None

    def summary(self) -> dict:
        fired: dict[str, int] = {}
        for e in self.run.trace:
            if e.ev == "action_fire":
                fired[e.node] = fired.get(e.node, 0) + 1
        return {
            "anomaly_step": self.anomaly_step,
            "anomalies": [{"rank": r, "t": t} for r, t in self.anomaly_steps()],
            "fired_actions": dict(sorted(fired.items())),
            "eval_counts": eval_counts(self.run.trace),
            "epochs": self.run.epochs,
        }


def true_steps(run: RunResult, name: str) -> list[list[int]]:
    return [[t for t, v in enumerate(vals) if isinstance(v, BoolV) and v.b] for vals in run.watched[name]]


def run_case_study(config: ToyIgnitionConfig | None = None, outdir: str | Path | None = None,
                   trace_path: str | Path | None = None, dag: Dag | None = None, **kwargs) -> CaseResult:
    config = config or ToyIgnitionConfig()
    dag = dag or case_study_dag()
    watch = [w for w in WATCH if w in dag.by_name]
    run = run_lockstep(dag, workload(config), config.ranks, config.steps, outdir=outdir,
                       trace_path=trace_path, watch=watch, **kwargs)
    res = CaseResult(config, run, {w: true_steps(run, w) for w in watch})
    if outdir is not None:
        Path(outdir, "summary.json").write_text(json.dumps(res.summary(), indent=2, sort_keys=True) + "\n")
    return res
