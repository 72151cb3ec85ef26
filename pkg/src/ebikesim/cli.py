"""Command-line entry point: ``ebikesim <command> [flags]``.

Commands
--------
simulate   run a scenario, write telemetry and a summary
predict    print the route distribution for a history file and segment
plan       print the assistance plan for an estimates file and budget
calibrate  fit the rider of a scenario to its [calibration] targets
report     recompute the summary from a saved telemetry file
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

from .cyclist import predicted_ventilation
from .energy import load_estimates, solve_assist_plan
from .errors import EbikeSimError
from .routes import load_history, predict_route, route_distribution
from .scenario import load_scenario
from .simulation import read_telemetry, run_simulation, summarize, write_telemetry


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False)


def _simulate_one(scenario_path: str, seed: int, out_dir: str, fmt: str, suffix: str) -> dict:
    scenario = load_scenario(scenario_path)
    result = run_simulation(scenario, seed)
    out = Path(out_dir)
    tele = write_telemetry(result.records, out / f"telemetry{suffix}.{fmt}", fmt)
    summary = summarize(result.records)
    summary["seed"] = seed
    summary["replans"] = len(result.replans)
    (out / f"summary{suffix}.json").write_text(_dump(summary) + "\n", encoding="utf-8")
    return {"seed": seed, "telemetry": str(tele)}


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = args.seed or [None]
    if seeds == [None]:
        seeds = [load_scenario(args.scenario).seed]
    multi = len(seeds) > 1
    jobs = [(str(args.scenario), s, str(out), args.format, f"_seed{s}" if multi else "") for s in seeds]
    if args.jobs > 1 and multi:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            done = list(pool.map(_simulate_one, *zip(*jobs)))
    else:
        done = [_simulate_one(*j) for j in jobs]
    for d in done:
        print(f"seed {d['seed']}: wrote {d['telemetry']}")
    return 0


def cmd_predict(args) -> int:
    history = load_history(args.history)
    dist = route_distribution(history, args.segment)
    best = predict_route(history, args.segment)
    rows = sorted(dist.entries.items(), key=lambda kv: (-kv[1], kv[0]))
    if args.format == "json":
        print(_dump({
            "segment": args.segment,
            "routes": [{"route": list(r), "probability": p} for r, p in rows],
            "predicted": list(best),
        }))
        return 0
    width = max(len("->".join(r)) for r, _ in rows)
    print(f"{'route':<{width}}  probability")
    for route, p in rows:
        print(f"{'->'.join(route):<{width}}  {p:.6f}")
    print(f"predicted: {'->'.join(best)}")
    return 0


def cmd_plan(args) -> int:
    estimates = load_estimates(args.estimates)
    plan = solve_assist_plan(estimates, args.budget)
    print(_dump(asdict(plan)))
    return 0


def cmd_calibrate(args) -> int:
    # load_scenario already fits the rider when [calibration] is present
    scenario = load_scenario(args.scenario)
    if not scenario.calibration:
        raise EbikeSimError(f"{args.scenario}: no [calibration] section")
    fitted = scenario.cyclist
    report = {
        "resting_ventilation": fitted.resting_ventilation,
        "ventilation_gain": fitted.ventilation_gain,
        "ventilation_time_constant": fitted.ventilation_time_constant,
        "targets": [
            {**asdict(t), "kind": type(t).__name__, "predicted": predicted_ventilation(fitted, t)}
            for t in scenario.calibration
        ],
    }
    print(_dump(report))
    return 0


def cmd_report(args) -> int:
    records = read_telemetry(args.telemetry)
    print(_dump(summarize(records)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ebikesim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, action="append",
                   help="RNG seed; repeat for several independent runs")
    p.add_argument("--out", default=".")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for multi-seed runs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("predict", help="route distribution from a history file")
    p.add_argument("--history", required=True)
    p.add_argument("--segment", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="csv prints a table")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("plan", help="assistance plan for an estimates file")
    p.add_argument("--estimates", required=True)
    p.add_argument("--budget", type=float, required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("calibrate", help="fit rider ventilation to scenario targets")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("report", help="summary from saved telemetry")
    p.add_argument("--telemetry", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EbikeSimError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
