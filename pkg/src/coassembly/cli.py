"""Command-line entry point.

Subcommands: validate, run, compare, repl, serve, report.  Exit codes:
0 success, 1 validation/data errors, 2 usage errors.  The environment
variable COASSEMBLY_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import loaders, metrics, sim
from . import trace as tr
from .errors import CoassemblyError, OutOfTurn
from .world import BASELINE, CONVERSATIONAL


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("COASSEMBLY_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CoassemblyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coassembly",
        description="Conversational human-robot collaborative assembly simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate plan/script/scenario files")
    p.add_argument("--plan", type=Path)
    p.add_argument("--script", type=Path)
    p.add_argument("--scenario", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run one scenario and write trace + report")
    _scenario_args(p)
    p.add_argument("--mode", choices=[CONVERSATIONAL, BASELINE])
    p.add_argument("--out", "-o", type=Path, default=Path("out"))
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run both modes with a shared seed")
    _scenario_args(p)
    p.add_argument("--out", "-o", type=Path, default=Path("out"))
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("repl", help="interactive operator console (virtual time)")
    _scenario_args(p)
    p.add_argument("--mode", choices=[CONVERSATIONAL, BASELINE])
    p.add_argument("--realtime", action="store_true", help="map wall time to sim time")
    p.add_argument("--out", "-o", type=Path, help="write the session trace here")
    p.set_defaults(func=cmd_repl)

    p = sub.add_parser("serve", help="serve the HTTP skill backend")
    _scenario_args(p)
    p.add_argument("--mode", choices=[CONVERSATIONAL, BASELINE])
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="compute metrics from trace files")
    p.add_argument("traces", nargs="+", type=Path)
    p.add_argument("--csv", type=Path, help="also append CSV rows here")
    p.set_defaults(func=cmd_report)

    return parser


def _scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", type=Path, required=True)
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--max-time", type=float, help="override max sim time (seconds)")


def _load(args) -> loaders.ScenarioConfig:
    config = loaders.load_scenario(args.scenario)
    if args.seed is not None:
        config.seed = args.seed
        config.failures = config.failures.fresh()
        config.failures.seed = args.seed
    if getattr(args, "max_time", None):
        config.max_time_ms = tr.s_to_ms(args.max_time)
    return config


def cmd_validate(args) -> int:
    checked = False
    failed = False
    for label, path, loader in (
        ("plan", args.plan, loaders.load_plan),
        ("script", args.script, loaders.load_script),
        ("scenario", args.scenario, loaders.load_scenario),
    ):
        if path is None:
            continue
        checked = True
        try:
            loader(path)
            print(f"{label} {path}: ok")
        except CoassemblyError as exc:
            failed = True
            print(f"{label} {path}: {exc}", file=sys.stderr)
    if not checked:
        print("nothing to validate; pass --plan/--script/--scenario", file=sys.stderr)
        return 2
    return 1 if failed else 0


def cmd_run(args) -> int:
    config = _load(args)
    mode = args.mode or config.mode
    trace = sim.run_scenario(config, mode=mode)
    args.out.mkdir(parents=True, exist_ok=True)
    trace_path = args.out / f"{mode}.trace.jsonl"
    trace.save(trace_path)
    report = metrics.compute_metrics(trace)
    report_path = args.out / f"{mode}.report.json"
    report_path.write_text(report.to_json() + "\n", encoding="utf-8")
    print(metrics.render_table(report))
    print(f"trace: {trace_path}")
    print(f"report: {report_path}")
    return 0


def cmd_compare(args) -> int:
    config = _load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    reports = {}
    for mode in (BASELINE, CONVERSATIONAL):
        trace = sim.run_scenario(config, mode=mode)
        trace.save(args.out / f"{mode}.trace.jsonl")
        reports[mode] = metrics.compute_metrics(trace)
    comparison = metrics.compare(reports[BASELINE], reports[CONVERSATIONAL])
    comparison_path = args.out / "comparison.json"
    comparison_path.write_text(comparison.to_json() + "\n", encoding="utf-8")
    print(
        f"execution time reduction: {comparison.execution_time_reduction_pct:.1f}%\n"
        f"robot downtime reduction: {comparison.downtime_reduction_pct:.1f}%"
    )
    print(f"artifacts in {args.out}/")
    return 0


def cmd_repl(args) -> int:
    config = _load(args)
    runtime = sim.build_runtime(config, mode=args.mode, scripted=False)

    def show(record: tr.TraceRecord) -> None:
        if record.kind == tr.UTTERANCE and record.payload.get("speaker") == "robot":
            print(f"[{record.t_ms / 1000:8.3f}] robot: {record.payload['text']}")

    runtime.trace.subscribe(show)
    print("Type to talk to the robot. '@<seconds> <text>' pins an input time")
    print("(replay mode); an empty line lets sim time run; Ctrl-D ends the session.")
    runtime.world.try_start_work()
    runtime.settle(0)
    replay = False
    while not runtime.ended:
        try:
            line = input("> ").strip()
        except EOFError:
            print()
            break
        if not line:
            runtime.advance_until_quiescent()
            continue
        at_ms = runtime.world.now_ms
        if line.startswith("@"):
            stamp, _, rest = line[1:].partition(" ")
            try:
                at_ms = max(at_ms, tr.s_to_ms(float(stamp)))
            except ValueError:
                print(f"bad time prefix {stamp!r}", file=sys.stderr)
                continue
            line = rest.strip()
            if not line:
                continue
            replay = True
            runtime.advance_to(at_ms)
        try:
            runtime.user_text(line, at_ms)
        except OutOfTurn as exc:
            print(f"(out of turn: {exc})", file=sys.stderr)
            continue
        runtime.settle(at_ms)
        if not replay:
            # interactive mode: let the consequences play out immediately
            runtime.advance_until_quiescent()
    runtime.advance_until_quiescent()
    runtime.finish_if_needed()
    trace = runtime.trace.build()
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        trace.save(args.out / "repl.trace.jsonl")
        print(f"trace: {args.out / 'repl.trace.jsonl'}")
    return 0


def cmd_serve(args) -> int:
    from .backend import SkillService
    from .server import serve

    config = _load(args)
    service = SkillService(config, mode=args.mode, realtime=True)
    print(f"serving on http://{args.host}:{args.port} (mode: {service.runtime.mode})")
    serve(service, host=args.host, port=args.port)
    return 0


def cmd_report(args) -> int:
    rows = [metrics.CSV_HEADER]
    for path in args.traces:
        trace = tr.Trace.load(path)
        report = metrics.compute_metrics(trace)
        print(f"== {path}")
        print(metrics.render_table(report))
        print(report.to_json())
        rows.append(metrics.csv_row(report, scenario=path.stem, mode="-"))
    if args.csv is not None:
        args.csv.write_text("\n".join(rows) + "\n", encoding="utf-8")
        print(f"csv: {args.csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
