"""Command line entry point: generate trials, run controllers, sweep thresholds, report."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import dump_config, load_config
from .harness.batch import format_report, load_results, run_trials, sweep_thresholds
from .harness.reach import CONTROLLERS
from .harness.trials import TrialGenerationError, generate_trial, load_trials, save_trials
from .world import SimulationFault

log = logging.getLogger("clutter_mpc")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clutter-mpc", description=__doc__)
    p.add_argument("--config", type=Path, help="YAML config; omitted keys keep their defaults")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate trial specs")
    g.add_argument("--seed", type=int, required=True, help="first seed")
    g.add_argument("--fixed", type=int, required=True)
    g.add_argument("--movable", type=int, required=True)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--out", type=Path, required=True)

    r = sub.add_parser("run", help="run a controller on a trial directory")
    r.add_argument("--trials", type=Path, required=True)
    r.add_argument("--controller", choices=sorted(CONTROLLERS), required=True)
    r.add_argument("--reaches", type=int, default=1)
    r.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("sweep", help="single-reach MPC over several force thresholds")
    s.add_argument("--trials", type=Path, required=True)
    s.add_argument("--thresholds", type=_floats, default=[3, 5, 10, 15, 25])
    s.add_argument("--out", type=Path, required=True)

    rep = sub.add_parser("report", help="recompute the CSV report from trial logs")
    rep.add_argument("--in", dest="input", type=Path, required=True)
    return p


def _faults(results) -> int:
    return sum(1 for r in results for o in r.reaches if o.reason == "sim_fault")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    config = load_config(args.config)

    if args.command == "gen":
        try:
            specs = [generate_trial(args.seed + i, args.fixed, args.movable, config) for i in range(args.count)]
        except TrialGenerationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        save_trials(specs, args.out)
        dump_config(config, args.out / "config.yaml")
        print(f"wrote {len(specs)} trials to {args.out}")
        return 0

    if args.command == "report":
        results = load_results(args.input)
        if not results:
            print(f"error: no trial logs in {args.input}", file=sys.stderr)
            return 2
        text = format_report(results)
        (args.input / "report.csv").write_text(text)
        print(text, end="")
        return 0

    specs = load_trials(args.trials)
    if not specs:
        print(f"error: no trials in {args.trials}", file=sys.stderr)
        return 2
    args.out.mkdir(parents=True, exist_ok=True)
    dump_config(config, args.out / "config.yaml")
    try:
        if args.command == "run":
            results = run_trials(specs, args.controller, config, args.reaches, args.jobs, args.out)
            text = format_report(results)
            (args.out / "report.csv").write_text(text)
            print(text, end="")
            faults = _faults(results)
        else:
            sweep = sweep_thresholds(specs, args.thresholds, config, args.jobs, args.out)
            (args.out / "sweep.json").write_text(json.dumps(sweep.to_dict(), indent=1))
            print("threshold,median,q1,q3,avg_force,avg_max_force,success_rate")
            for t, rep in zip(sweep.thresholds, sweep.reports):
                print(f"{t:g},{rep.median_force:.4f},{rep.q1_force:.4f},{rep.q3_force:.4f},"
                      f"{rep.avg_force:.4f},{rep.avg_max_force:.4f},{rep.success_rate:.4f}")
            print("correlation," + ("undefined" if sweep.correlation is None else f"{sweep.correlation:.4f}"))
            faults = 0
    except SimulationFault as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    if faults:
        print(f"error: {faults} reach(es) ended in a simulation fault", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
