"""Command-line front door: run scenarios, export graphs, check registers, serve."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .dot import to_dot
from .errors import EntailSyncError, ScriptError
from .registers import check_discard_complete, spec_by_kind
from .sim import Scenario, ScenarioRunner
from .wire import graph_to_text

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _resolve_seed(args_seed: int | None) -> int | None:
    env = os.environ.get("ENTAILSYNC_SEED")
    if env is not None:
        return int(env)
    return args_seed


def _load_scenario(path: str) -> Scenario:
    try:
        return Scenario.load(path)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ScriptError(f"malformed scenario {path}: {exc}") from exc


def cmd_run(args) -> int:
    try:
        scenario = _load_scenario(args.scenario)
        if args.stop_at_conflict:
            scenario.reconciler = "interactive"
            scenario.plans = {}
        dot_dir = Path(args.dot_dir) if args.dot_dir else None
        if dot_dir:
            dot_dir.mkdir(parents=True, exist_ok=True)

        def on_event(index, event, runner):
            if dot_dir is None:
                return
            for name in sorted(runner.replicas):
                path = dot_dir / f"step{index:03d}_{name}.dot"
                title = f"{scenario.name} step {index} ({event.get('event')}) at {name}"
                path.write_text(to_dot(runner.replicas[name].graph, title=title))

        runner = ScenarioRunner(scenario, seed=_resolve_seed(args.seed), on_event=on_event)
        report = runner.run()
    except ScriptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    text = report.to_text()
    sys.stdout.write(text)
    try:
        if args.out_dir:
            _write_outputs(Path(args.out_dir), runner, text)
        if args.report:
            Path(args.report).write_text(text)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if report.assert_failures or not report.converged:
        return EXIT_FAIL
    return EXIT_OK


def _write_outputs(out_dir: Path, runner: ScenarioRunner, report_text: str) -> None:
    """Report bundle: JSON report, per-replica value table, graph figures."""
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report_text)
    with open(out_dir / "states.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replica", "register", "kind", "value"])
        states = runner.states()
        for name in sorted(states):
            for reg in sorted(states[name], key=int):
                kind = runner.registry.entry(int(reg)).spec.kind
                writer.writerow([name, reg, kind, json.dumps(states[name][reg])])
    from .figures import render_graph

    for name in sorted(runner.replicas):
        render_graph(
            runner.replicas[name].graph,
            str(out_dir / f"graph_{name}.png"),
            title=f"{runner.scenario.name}: {name}",
        )


def cmd_export_dot(args) -> int:
    try:
        scenario = _load_scenario(args.scenario)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)

        def on_event(index, event, runner):
            if args.steps != "all":
                return
            for name in sorted(runner.replicas):
                path = out / f"step{index:03d}_{name}.dot"
                path.write_text(
                    to_dot(
                        runner.replicas[name].graph,
                        title=f"step {index}: {event.get('event')} ({name})",
                    )
                )

        runner = ScenarioRunner(scenario, seed=_resolve_seed(args.seed), on_event=on_event)
        runner.run()
        for name in sorted(runner.replicas):
            (out / f"final_{name}.dot").write_text(
                to_dot(runner.replicas[name].graph, title=f"final ({name})")
            )
            if args.json:
                (out / f"final_{name}.json").write_text(
                    graph_to_text(runner.replicas[name].graph)
                )
    except (ScriptError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def cmd_check_register(args) -> int:
    try:
        spec = spec_by_kind(args.kind)
    except EntailSyncError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = check_discard_complete(spec, max_ops=args.max_ops)
    if result.ok:
        print(
            f"{args.kind}: discard-complete "
            f"({result.histories_checked} histories, up to {args.max_ops} actions)"
        )
        return EXIT_OK
    print(f"{args.kind}: NOT discard-complete")
    print(f"counterexample: {result.counterexample.describe()}")
    return EXIT_FAIL


def cmd_serve(args) -> int:
    from .server import serve

    try:
        scenario = _load_scenario(args.scenario)
    except ScriptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        serve(scenario, host=args.host, port=args.port, seed=_resolve_seed(args.seed))
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entailsync",
        description="Operation-journal reconciliation middleware: scenario runner and tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and print its convergence report")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument(
        "--stop-at-conflict",
        action="store_true",
        help="defer all resolution; surface conflicts and exit nonzero",
    )
    p_run.add_argument("--report", help="also write the report JSON to this file")
    p_run.add_argument("--dot-dir", help="dump per-step DOT graphs here")
    p_run.add_argument(
        "--out-dir",
        help="write report.json, states.csv and graph figures to this directory",
    )
    p_run.set_defaults(func=cmd_run)

    p_dot = sub.add_parser("export-dot", help="run a scenario and export DOT graphs")
    p_dot.add_argument("scenario")
    p_dot.add_argument("--out", required=True)
    p_dot.add_argument("--steps", choices=["all", "final"], default="final")
    p_dot.add_argument("--json", action="store_true", help="also export canonical JSON")
    p_dot.add_argument("--seed", type=int, default=None)
    p_dot.set_defaults(func=cmd_export_dot)

    p_check = sub.add_parser(
        "check-register", help="exhaustively check a register kind for discard-completeness"
    )
    p_check.add_argument("kind")
    p_check.add_argument("--max-ops", type=int, default=6)
    p_check.set_defaults(func=cmd_check_register)

    p_serve = sub.add_parser("serve", help="serve the interactive reconcile API")
    p_serve.add_argument("scenario")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8642)
    p_serve.add_argument("--seed", type=int, default=None)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
