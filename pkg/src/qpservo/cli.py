"""Command-line interface.

    qpservo run <scenario.yaml> [--out PATH] [--set key=value ...]
                                [--dt S] [--repeat N] [--no-figures]
    qpservo bench <suite.yaml>

`run` executes one scenario, prints a summary line, and (with --out) writes
the CSV trace plus report figures next to it. Exit code 0 means the goal
was reached, 1 means it was not (collision, timeout, solver failure), 2
means the input file did not parse.

`bench` runs every scenario in a suite file (YAML list under `scenarios:`,
paths relative to the suite file) across worker threads and prints one
table row per scenario in suite order.

Set QPSERVO_LOG=debug|info|warning for log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import sim
from .sim import Scenario, ScenarioError, load_scenario, params_from_dict

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_PARSE = 2


def _setup_logging():
    level = os.environ.get("QPSERVO_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(name)s %(levelname)s %(message)s")


def _parse_overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ScenarioError(f"--set {pair!r}: expected key=value")
        key, value = pair.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _apply_overrides(scenario: Scenario, overrides: dict, dt_flag) -> Scenario:
    """Flat key=value overrides: controller gains by name, plus dt/max_time."""
    param_over = {}
    dt = dt_flag
    max_time = None
    for key, value in overrides.items():
        if key == "dt":
            dt = float(value)
        elif key == "max_time":
            max_time = float(value)
        else:
            param_over[key] = float(value)
    params = params_from_dict(param_over, base=scenario.params) if param_over else None
    return scenario.with_overrides(dt=dt, max_time=max_time, params=params)


def _summary_line(name: str, outcome: sim.Outcome, solve_ms_max: float) -> str:
    ttg = f"{outcome.time_to_goal:.2f}" if np.isfinite(outcome.time_to_goal) else "-"
    clear = (
        f"{outcome.min_clearance_overall:.4f}"
        if np.isfinite(outcome.min_clearance_overall)
        else "-"
    )
    return (
        f"{name}: result={outcome.result} time_to_goal={ttg}s "
        f"min_clearance={clear}m solve_mean={outcome.mean_solve_time * 1e3:.2f}ms "
        f"solve_max={solve_ms_max:.2f}ms"
    )


def run_command(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        scenario = _apply_overrides(scenario, _parse_overrides(args.set), args.dt)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    repeat = max(1, args.repeat)
    traces = outcome = None
    mean_times = []
    for _ in range(repeat):
        traces, outcome = sim.run(scenario)
        mean_times.append(outcome.mean_solve_time)
    solve_max = max(tr.solve_ms for tr in traces)
    print(_summary_line(Path(args.scenario).name, outcome, solve_max))
    if repeat > 1:
        ms = np.array(mean_times) * 1e3
        print(f"  repeat={repeat}: mean solve {ms.mean():.2f}ms (min {ms.min():.2f}, max {ms.max():.2f})")

    if args.out:
        sim.write_trace(traces, args.out)
        print(f"trace written to {args.out}")
        if not args.no_figures:
            from .report import render_report

            for path in render_report(traces, args.out):
                print(f"figure written to {path}")

    return EXIT_OK if outcome.result == sim.REACHED else EXIT_RUNTIME


def bench_command(args) -> int:
    suite_path = Path(args.suite)
    try:
        data = yaml.safe_load(suite_path.read_text())
    except FileNotFoundError:
        print(f"error: {suite_path}: no such file", file=sys.stderr)
        return EXIT_PARSE
    except yaml.YAMLError as exc:
        print(f"error: {suite_path}: {exc}", file=sys.stderr)
        return EXIT_PARSE

    entries = (data or {}).get("scenarios") if isinstance(data, dict) else data
    if not entries:
        print("error: suite lists no scenarios", file=sys.stderr)
        return EXIT_PARSE

    scenarios = []
    for entry in entries:
        path = Path(entry)
        if not path.is_absolute():
            path = suite_path.parent / path
        try:
            scenarios.append((Path(entry).name, load_scenario(path)))
        except ScenarioError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PARSE

    with ThreadPoolExecutor(max_workers=min(4, len(scenarios))) as pool:
        results = list(pool.map(lambda item: sim.run(item[1]), scenarios))

    header = f"{'scenario':<24} {'result':<14} {'t_goal[s]':>9} {'min_clear[m]':>12} {'solve[ms]':>10}"
    print(header)
    print("-" * len(header))
    n_ok = 0
    solve_means = []
    for (name, _), (traces, outcome) in zip(scenarios, results):
        ttg = f"{outcome.time_to_goal:9.2f}" if np.isfinite(outcome.time_to_goal) else f"{'-':>9}"
        clear = (
            f"{outcome.min_clearance_overall:12.4f}"
            if np.isfinite(outcome.min_clearance_overall)
            else f"{'-':>12}"
        )
        print(f"{name:<24} {outcome.result:<14} {ttg} {clear} {outcome.mean_solve_time * 1e3:10.2f}")
        solve_means.append(outcome.mean_solve_time)
        n_ok += outcome.result == sim.REACHED
    print("-" * len(header))
    print(
        f"success {n_ok}/{len(scenarios)}, "
        f"mean solve {np.mean(solve_means) * 1e3:.2f} ms"
    )
    return EXIT_OK if n_ok == len(scenarios) else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpservo", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario")
    run_p.add_argument("scenario", help="scenario YAML file")
    run_p.add_argument("--out", help="write the CSV trace (figures land next to it)")
    run_p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a controller gain or dt/max_time")
    run_p.add_argument("--dt", type=float, default=None, help="override the control period")
    run_p.add_argument("--repeat", type=int, default=1, help="repeat runs for timing statistics")
    run_p.add_argument("--no-figures", action="store_true", help="skip report figures")
    run_p.set_defaults(func=run_command)

    bench_p = sub.add_parser("bench", help="run a scenario suite")
    bench_p.add_argument("suite", help="suite YAML file")
    bench_p.set_defaults(func=bench_command)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except Exception as exc:  # runtime failure, not a parse problem
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
