"""Single-reach MPC over several force thresholds on one trial set.

Prints the pooled contact-force quartiles per threshold and the correlation
between threshold and median force.

Example:
    python3 scripts/run_sweep.py --seed 1000 --count 30 --out runs/sweep
"""
import argparse
import json
import os
from pathlib import Path

from clutter_mpc.config import dump_config, load_config
from clutter_mpc.harness.batch import sweep_thresholds
from clutter_mpc.harness.trials import generate_trial, save_trials


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", type=Path)
    p.add_argument("--seed", type=int, default=1000)
    p.add_argument("--count", type=int, default=30)
    p.add_argument("--fixed", type=int, default=20)
    p.add_argument("--movable", type=int, default=20)
    p.add_argument("--thresholds", default="3,5,10,15,25")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", type=Path, default=Path("runs/sweep"))
    args = p.parse_args()

    config = load_config(args.config)
    thresholds = [float(t) for t in args.thresholds.split(",")]
    specs = [generate_trial(args.seed + i, args.fixed, args.movable, config) for i in range(args.count)]
    args.out.mkdir(parents=True, exist_ok=True)
    save_trials(specs, args.out / "trials")
    dump_config(config, args.out / "config.yaml")
    report = sweep_thresholds(specs, thresholds, config, args.jobs, args.out / "logs")
    (args.out / "sweep.json").write_text(json.dumps(report.to_dict(), indent=1))
    print("threshold,q1,median,q3,success_rate")
    for t, r in zip(report.thresholds, report.reports):
        print(f"{t:g},{r.q1_force:.3f},{r.median_force:.3f},{r.q3_force:.3f},{r.success_rate:.3f}")
    print(f"correlation,{report.correlation}")


if __name__ == "__main__":
    main()
