"""Command line: ``trigflow check|graph|run|trace-diff``.

Exit status is 0 on success, 2 for diagnostics in the workflow (or bad
usage) and 1 for failures while running.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .compiler import Dag, compile_source, export_dot
from .errors import CompileError, ConfigError, LexError, ParseError, RegistryError, WorkflowError
from .harness import bundled_workflows, run_case_study, workflow_source
from .ops import default_registry
from .toysim import FIELDS, ToyIgnitionConfig
from .trace import read_jsonl, value_diff

EXIT_OK, EXIT_RUNTIME, EXIT_DIAGNOSTIC = 0, 1, 2
FRONT_END_ERRORS = (LexError, ParseError, CompileError, RegistryError)


def _load(path: str) -> tuple[str, str]:
    p = Path(path)
    if not p.exists() and path in bundled_workflows():
        return f"<{path}>", workflow_source(path)
    return path, p.read_text(encoding="utf-8")


def _compile(path: str, registry=None) -> Dag:
    name, text = _load(path)
    try:
        return compile_source(text, registry)
    except FRONT_END_ERRORS as exc:
        exc.filename = name
        raise


def cmd_check(args) -> int:
    dag = _compile(args.file)
    n_global = sum(n.is_global for n in dag.nodes)
    print(f"{args.file}: ok ({len(dag.nodes)} nodes, {len(dag.triggers)} triggers, {n_global} global)")
    return EXIT_OK


def cmd_graph(args) -> int:
    dot = export_dot(_compile(args.file))
    if args.dot:
        Path(args.dot).write_text(dot, encoding="utf-8")
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def cmd_run(args) -> int:
    registry = default_registry()
    dag = _compile(args.file, registry)
    config = ToyIgnitionConfig(ranks=args.ranks, steps=args.steps, noise_seed=args.seed)
    if args.ignition_rank is not None:
        config = replace(config, ignition_rank=args.ignition_rank)
    if args.ignition_step is not None:
        config = replace(config, ignition_step=args.ignition_step)
    try:
        config.validate()
    except ConfigError as exc:
        print(f"trigflow: invalid simulation settings: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    trace_path = Path(args.trace) if args.trace else outdir / "run.trace.jsonl"
    missing = [s.name for s in dag.sources if s.name[len("data."):] not in FIELDS]
    if missing:
        print(f"{args.file}: the toy-ignition simulation does not provide {', '.join(missing)}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    res = run_case_study(config, outdir, trace_path, dag=dag, eager=args.eager, record_values=True,
                         registry=registry,
                         engine_kwargs={"reload_every": args.reload_every, "overrides": args.overrides})
    summary = res.summary()
    print(f"ran {config.steps} steps on {config.ranks} ranks; anomaly_step={summary['anomaly_step']}; "
          f"actions fired: {sum(summary['fired_actions'].values())}")
    return EXIT_OK


def cmd_trace_diff(args) -> int:
    problems = value_diff(read_jsonl(args.a), read_jsonl(args.b))
    for p in problems[:50]:
        print(p)
    if problems:
        print(f"{len(problems)} differences", file=sys.stderr)
        return EXIT_RUNTIME
    print("traces agree on every demanded value")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trigflow", description="Trigger-driven dataflow workflows.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and compile a workflow")
    p.add_argument("file")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("graph", help="export the compiled graph as Graphviz DOT")
    p.add_argument("file")
    p.add_argument("--dot", help="write DOT here instead of stdout")
    p.set_defaults(fn=cmd_graph)

    p = sub.add_parser("run", help="run a workflow against a simulation")
    p.add_argument("file")
    p.add_argument("--ranks", type=int, default=4)
    p.add_argument("--steps", type=int, default=220)
    p.add_argument("--sim", choices=["toy-ignition"], default="toy-ignition")
    p.add_argument("--outdir", required=True)
    p.add_argument("--trace")
    p.add_argument("--seed", type=int, default=ToyIgnitionConfig.noise_seed)
    p.add_argument("--eager", action="store_true", help="evaluate every node every step (reference run)")
    p.add_argument("--ignition-rank", type=int)
    p.add_argument("--ignition-step", type=int)
    p.add_argument("--reload-every", type=int, default=0, help="re-read --overrides every K steps")
    p.add_argument("--overrides", help='JSON file {"op": "module:function"}')
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("trace-diff", help="compare the demanded values of two traces")
    p.add_argument("a", help="trace of the lazy run")
    p.add_argument("b", help="trace of the reference run")
    p.set_defaults(fn=cmd_trace_diff)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FRONT_END_ERRORS as exc:
        print(exc.diagnostic(getattr(exc, "filename", args.file)), file=sys.stderr)
        return EXIT_DIAGNOSTIC
    except OSError as exc:
        print(f"trigflow: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except WorkflowError as exc:
        print(f"trigflow: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
