"""Run trial sets (optionally in a process pool), threshold sweeps and CSV reports."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..config import Config
from .metrics import AggregateReport, aggregate, pearson
from .reach import ReachOutcome, TrialLog, TrialResult, supervise
from .trials import TrialSpec

__all__ = [
    "log_path",
    "run_trial",
    "run_trials",
    "results_from_log",
    "load_results",
    "SweepReport",
    "sweep_thresholds",
    "table_columns",
    "format_report",
]


def log_path(directory: str | Path, trial_id: str, controller: str) -> Path:
    return Path(directory) / f"log_{trial_id}_{controller}.jsonl"


def run_trial(spec: TrialSpec, controller: str, config: Config, max_reaches: int,
              log_dir: str | Path | None = None) -> TrialResult:
    if log_dir is None:
        return supervise(spec, controller, config, max_reaches)
    log = TrialLog.open(log_path(log_dir, spec.trial_id, controller))
    try:
        return supervise(spec, controller, config, max_reaches, log=log)
    finally:
        log.close()


def _run_packed(args):
    return run_trial(*args)


def run_trials(specs: Sequence[TrialSpec], controller: str, config: Config, max_reaches: int = 1,
               jobs: int = 1, log_dir: str | Path | None = None) -> list[TrialResult]:
    """Results come back in the order of ``specs`` regardless of ``jobs``."""
    if log_dir is not None:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
    work = [(spec, controller, config, max_reaches, log_dir) for spec in specs]
    if jobs <= 1 or len(work) <= 1:
        return [_run_packed(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_packed, work, chunksize=1))


def results_from_log(path: str | Path) -> TrialResult:
    """Rebuild a TrialResult from one line-delimited trial log."""
    trial_id = controller = None
    samples: dict[int, list] = {}
    paths: dict[int, list] = {}
    reaches: list[ReachOutcome] = []
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            event = rec.get("event")
            if event == "trial_start":
                trial_id, controller = rec["trial"], rec["controller"]
            elif event == "reach_end":
                k = rec["reach"]
                reaches.append(ReachOutcome(rec["success"], rec["reason"], rec["duration"],
                                            samples.get(k, []), paths.get(k, []), rec["centroid"]))
            elif rec.get("phase") == "reach" and "ee" in rec:
                k = rec["reach"]
                samples.setdefault(k, []).append([f[-1] for f in rec["forces"]])
                paths.setdefault(k, []).append(rec["ee"])
    if trial_id is None:
        raise ValueError(f"{path}: no trial_start record")
    return TrialResult(trial_id, controller, reaches)


def load_results(directory: str | Path) -> list[TrialResult]:
    return [results_from_log(p) for p in sorted(Path(directory).glob("log_*.jsonl"))]


@dataclass(frozen=True)
class SweepReport:
    thresholds: tuple[float, ...]
    reports: tuple[AggregateReport, ...]
    correlation: float | None

    def to_dict(self) -> dict:
        return {"thresholds": list(self.thresholds), "reports": [r.to_dict() for r in self.reports],
                "correlation": self.correlation}


def sweep_thresholds(specs: Sequence[TrialSpec], thresholds: Sequence[float], config: Config,
                     jobs: int = 1, log_dir: str | Path | None = None) -> SweepReport:
    """Single-reach MPC on the same trials for each threshold; correlate threshold with median force."""
    if len(thresholds) < 2:
        raise ValueError("a sweep needs at least two thresholds")
    reports = []
    for thresh in thresholds:
        cfg = config.replace(controller={"f_thresh": float(thresh)})
        sub = None if log_dir is None else Path(log_dir) / f"thresh_{float(thresh):g}"
        reports.append(aggregate(run_trials(specs, "mpc", cfg, 1, jobs, sub)))
    corr = pearson(thresholds, [r.median_force for r in reports])
    return SweepReport(tuple(float(t) for t in thresholds), tuple(reports), corr)


def table_columns(results: Sequence[TrialResult]) -> dict[str, AggregateReport]:
    """Summary columns: multi-reach and single-reach per controller present."""
    columns = {}
    for controller in sorted({r.controller for r in results}):
        mine = [r for r in results if r.controller == controller]
        if any(len(r.reaches) > 1 for r in mine):
            columns[f"{controller} (up to {max(len(r.reaches) for r in mine)} reaches)"] = aggregate(mine)
        columns[f"{controller} (single reach)"] = aggregate([r.first_reach() for r in mine])
    return columns


def format_report(results: Sequence[TrialResult]) -> str:
    """Per-trial rows followed by a summary block, comma separated."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial_id", "controller", "n_reaches", "success", "single_reach_success",
                "max_force", "n_samples", "reasons"])
    for r in results:
        w.writerow([r.trial_id, r.controller, len(r.reaches), int(r.success), int(r.first_reach().success),
                    f"{r.max_force:.4f}", sum(1 for f in r.forces if f > 0),
                    ";".join(o.reason for o in r.reaches)])
    if results:
        columns = table_columns(results)
        w.writerow([])
        w.writerow(["metric", *columns])
        for field in dataclasses.fields(AggregateReport):
            w.writerow([field.name, *(_fmt(getattr(rep, field.name)) for rep in columns.values())])
    return buf.getvalue()


def _fmt(v) -> str:
    return str(v) if isinstance(v, int) else f"{v:.4f}"
