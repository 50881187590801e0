"""Command-line front end: run, compare, slice and sweep scenarios.

Exit codes: 0 success, 2 invalid scenario, 3 prediction-mode infeasibility or
numerical abort, 4 output I/O failure. The PBCBF_LOG environment variable
(error | info | debug) sets diagnostic verbosity on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import OutputError, PbcbfError, ScenarioError
from .harness.runner import Metrics, SliceGrid, run_scenario, safe_set_slice
from .harness.scenario import Scenario, load_scenario
from .harness.traceio import write_metrics_json, write_trace_csv

EXIT_OK = 0
EXIT_SCENARIO = 2
EXIT_ABORT = 3
EXIT_IO = 4

log = logging.getLogger("pbcbf.cli")

#: Sweep shorthand: bare parameter names map to these document paths.
PARAM_SHORTCUTS = {
    "gamma": "filter.gamma",
    "mode": "filter.mode",
    "dt_sim": "dt_sim",
    "duration": "duration",
    "dt_prediction": "filter.dt_prediction",
}


def _configure_logging() -> None:
    level = {
        "error": logging.ERROR,
        "info": logging.INFO,
        "debug": logging.DEBUG,
    }.get(os.environ.get("PBCBF_LOG", "error").lower(), logging.ERROR)
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def _output_paths(scenario: Scenario, out_dir: str | None, suffix: str = ""):
    base = Path(out_dir) if out_dir else Path.cwd()
    trace = scenario.outputs.get("trace", f"{scenario.name}{suffix}_trace.csv")
    metrics = scenario.outputs.get("metrics", f"{scenario.name}{suffix}_metrics.json")
    if suffix and "trace" in scenario.outputs:
        trace = str(Path(trace).with_suffix("")) + f"{suffix}.csv"
    if suffix and "metrics" in scenario.outputs:
        metrics = str(Path(metrics).with_suffix("")) + f"{suffix}.json"
    return base / trace, base / metrics


def _write_outputs(scenario: Scenario, trace, metrics: Metrics, out_dir, suffix=""):
    trace_path, metrics_path = _output_paths(scenario, out_dir, suffix)
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    write_trace_csv(
        trace,
        trace_path,
        scenario.system.state_names,
        scenario.system.input_names,
        len(scenario.barriers),
    )
    write_metrics_json(metrics, metrics_path)
    return trace_path, metrics_path


def _metrics_table(rows: list[tuple[str, Metrics]]) -> str:
    header = (
        f"{'case':<12} {'violated':<9} {'min_margin':>12} {'first_act':>10} "
        f"{'saturated':>10} {'qp_infeas':>10}"
    )
    lines = [header, "-" * len(header)]
    for label, m in rows:
        first = "-" if m.first_activation_time is None else f"{m.first_activation_time:.4g}"
        lines.append(
            f"{label:<12} {str(m.violated):<9} {m.min_margin:>12.5g} {first:>10} "
            f"{m.saturation_steps:>10d} {m.qp_infeasible_steps:>10d}"
        )
    return "\n".join(lines)


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    trace, metrics = run_scenario(scenario)
    trace_path, metrics_path = _write_outputs(scenario, trace, metrics, args.out_dir)
    print(_metrics_table([(scenario.filter_config.mode, metrics)]))
    print(f"trace:   {trace_path}")
    print(f"metrics: {metrics_path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    rows = []
    for mode in modes:
        variant = scenario.with_overrides({"filter.mode": mode})
        trace, metrics = run_scenario(variant)
        _write_outputs(variant, trace, metrics, args.out_dir, suffix=f"_{mode}")
        rows.append((mode, metrics))
    print(_metrics_table(rows))
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    dotted = PARAM_SHORTCUTS.get(args.param, args.param)
    rows = []
    for raw in args.values.split(","):
        raw = raw.strip()
        try:
            value: object = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        variant = scenario.with_overrides({dotted: value})
        trace, metrics = run_scenario(variant)
        _write_outputs(variant, trace, metrics, args.out_dir, suffix=f"_{args.param}={raw}")
        rows.append((f"{args.param}={raw}", metrics))
    print(_metrics_table(rows))
    return EXIT_OK


def _parse_grid(spec: str, scenario: Scenario) -> SliceGrid:
    axes = []
    for part in spec.split(","):
        part = part.strip()
        try:
            name, rng = part.split("=")
            lo, hi, count = rng.split(":")
            axes.append((name.strip(), float(lo), float(hi), int(count)))
        except ValueError as exc:
            raise ScenarioError(
                f"bad --grid entry '{part}' (expected name=min:max:count)"
            ) from exc
    if len(axes) != 2:
        raise ScenarioError("--grid needs exactly two axes, e.g. 'r=1:3:31,vr=-2:2:31'")
    names = scenario.system.state_names
    idx = []
    for name, *_ in axes:
        if name not in names:
            raise ScenarioError(f"unknown state '{name}'; states are {names}")
        idx.append(names.index(name))
    return SliceGrid(
        index1=idx[0],
        values1=np.linspace(axes[0][1], axes[0][2], axes[0][3]),
        index2=idx[1],
        values2=np.linspace(axes[1][1], axes[1][2], axes[1][3]),
        x_fixed=scenario.x0.copy(),
        dt=scenario.filter_config.dt_prediction,
        t_max=scenario.filter_config.t_max_prediction,
    )


def cmd_slice(args) -> int:
    scenario = load_scenario(args.scenario)
    grid = _parse_grid(args.grid, scenario)
    if args.dt is not None:
        grid.dt = args.dt
    barrier, policy = scenario.barriers[args.barrier]
    result = safe_set_slice(scenario.system, barrier, policy, grid)
    out = Path(args.out_dir or Path.cwd()) / (
        scenario.outputs.get("slice", f"{scenario.name}_slice.csv")
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    name1 = scenario.system.state_names[grid.index1]
    name2 = scenario.system.state_names[grid.index2]
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"{name1},{name2},h,h_p,failed\n")
            for i, v1 in enumerate(grid.values1):
                for j, v2 in enumerate(grid.values2):
                    fh.write(
                        f"{v1:.17g},{v2:.17g},{result.h[i, j]:.17g},"
                        f"{result.h_p[i, j]:.17g},{int(result.failed[i, j])}\n"
                    )
    except OSError as exc:
        raise OutputError(f"cannot write slice to '{out}': {exc}") from exc
    trimmed_lo, trimmed_hi = result.asymmetry(axis=2)
    print(f"slice: {out}")
    print(
        f"cells={result.h.size} trimmed({name2}<0)={trimmed_lo} "
        f"trimmed({name2}>0)={trimmed_hi} failed={int(result.failed.sum())}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbcbf",
        description="Prediction-based control barrier function scenario simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario, write trace CSV and metrics JSON")
    p_run.add_argument("scenario")
    p_run.add_argument("--out-dir", default=None)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run a scenario under several filter modes")
    p_cmp.add_argument("scenario")
    p_cmp.add_argument("--modes", default="none,base,pb")
    p_cmp.add_argument("--out-dir", default=None)
    p_cmp.set_defaults(func=cmd_compare)

    p_slc = sub.add_parser("slice", help="evaluate h and h_p over a 2-D state grid")
    p_slc.add_argument("scenario")
    p_slc.add_argument("--grid", required=True, help="e.g. 'r=1:3:31,vr=-2:2:31'")
    p_slc.add_argument("--barrier", type=int, default=0)
    p_slc.add_argument("--dt", type=float, default=None, help="prediction step override")
    p_slc.add_argument("--out-dir", default=None)
    p_slc.set_defaults(func=cmd_slice)

    p_swp = sub.add_parser("sweep", help="run a scenario over a list of parameter values")
    p_swp.add_argument("scenario")
    p_swp.add_argument("--param", required=True, help="name or dotted path, e.g. gamma")
    p_swp.add_argument("--values", required=True, help="comma-separated values")
    p_swp.add_argument("--out-dir", default=None)
    p_swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        log.error("%s", exc)
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PbcbfError as exc:
        print(f"aborted: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
