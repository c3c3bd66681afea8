"""Command line front end.

    rti simulate --scenario S.json --out DIR [--seed N]
    rti run --config C.json [--seed N]
    rti report --dir DIR [--format text|csv]

Exit codes: 0 success, 2 configuration problem, 3 runtime failure. The
RTI_SEED environment variable overrides the seed from scenario and config
files; an explicit --seed flag beats both.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import ConfigError, PhaseError, read_config_file, run_experiment
from .simulator import ScenarioError, read_scenario_file, simulate
from .traceio import write_trace_file, write_truth_file

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _env_seed() -> int | None:
    raw = os.environ.get("RTI_SEED")
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"RTI_SEED must be an integer, got {raw!r}") from None


def _effective_seed(flag_seed: int | None) -> int | None:
    if flag_seed is not None:
        return flag_seed
    return _env_seed()


def _cmd_simulate(args) -> int:
    scenario, params = read_scenario_file(args.scenario)
    seed = _effective_seed(args.seed)
    if seed is not None:
        scenario = replace(scenario, seed=seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace, truth = simulate(scenario, params)
    write_trace_file(out_dir / "trace.csv", trace)
    write_truth_file(
        out_dir / "truth.csv", truth, first_tick=scenario.calibration_rounds
    )
    received = sum(1 for r in trace if r.received)
    print(f"mode: {scenario.mode}")
    print(f"ticks: {scenario.total_ticks} ({scenario.calibration_rounds} calibration)")
    print(f"records: {len(trace)} ({received} received)")
    print(f"wrote {out_dir / 'trace.csv'}")
    print(f"wrote {out_dir / 'truth.csv'}")
    return EXIT_OK


def _cmd_run(args) -> int:
    config = read_config_file(args.config)
    seed = _effective_seed(args.seed)
    if seed is not None:
        config = replace(config, seed=seed)
    result = run_experiment(config)
    metrics = result.metrics
    print(f"method: {metrics['method']} (mode {metrics['mode']}, seed {metrics['seed']})")
    print(f"links: {metrics['num_links']}, rounds: {metrics['rounds']}")
    print(f"rmse_kalman_m: {metrics['rmse_kalman_m']:.4f}")
    print(f"rmse_argmax_m: {metrics['rmse_argmax_m']:.4f}")
    print(f"p90_error_m: {metrics['p90_error_m']:.4f}")
    print(f"outputs in {result.out_dir}")
    return EXIT_OK


def _flatten(metrics: dict) -> list[tuple[str, object]]:
    rows: list[tuple[str, object]] = []
    for key in sorted(metrics):
        value = metrics[key]
        if key == "fn_fp":
            for entry in value:
                tag = f"fn_fp[{entry['threshold']!r}]"
                rows.append((tag + ".fn_rate", entry["fn_rate"]))
                rows.append((tag + ".fp_rate", entry["fp_rate"]))
        elif isinstance(value, dict):
            for sub in sorted(value):
                rows.append((f"{key}.{sub}", value[sub]))
        else:
            rows.append((key, value))
    return rows


def _cmd_report(args) -> int:
    path = Path(args.dir) / "metrics.json"
    if not path.exists():
        raise ConfigError(f"no metrics.json under {args.dir}")
    metrics = json.loads(path.read_text(encoding="utf-8"))
    rows = _flatten(metrics)
    if args.format == "csv":
        print("metric,value")
        for key, value in rows:
            print(f"{key},{value}")
    else:
        width = max(len(key) for key, _ in rows)
        for key, value in rows:
            print(f"{key:<{width}}  {value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rti",
        description="Radio tomographic imaging: simulate link traces, run "
        "imaging and tracking experiments, report metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a trace from a scenario file")
    p_sim.add_argument("--scenario", required=True, help="scenario JSON file")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p_sim.set_defaults(func=_cmd_simulate)

    p_run = sub.add_parser("run", help="run a full experiment from a config file")
    p_run.add_argument("--config", required=True, help="experiment config JSON file")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("report", help="render metrics.json from a run directory")
    p_rep.add_argument("--dir", required=True, help="experiment output directory")
    p_rep.add_argument("--format", choices=("text", "csv"), default="text")
    p_rep.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhaseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - last resort
        print(f"unexpected error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
