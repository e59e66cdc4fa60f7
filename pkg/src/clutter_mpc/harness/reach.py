"""Reach execution, pull-out-and-retry supervision, and per-trial logs."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

import numpy as np

from ..arm import forward_kinematics
from ..baseline import BaselineController
from ..config import Config
from ..mpc import MpcController
from ..world import SimulationFault, WorldState, simulate_outer_step, skin_reading
from .trials import TrialSpec

__all__ = [
    "REASONS",
    "ReachOutcome",
    "TrialResult",
    "TrialLog",
    "make_controller",
    "run_reach",
    "supervise",
]

REASONS = ("reached", "stagnated", "safety_halt", "timeout", "sim_fault")
CONTROLLERS = {"mpc": MpcController, "baseline": BaselineController}


@dataclass
class ReachOutcome:
    success: bool
    reason: str
    duration: float
    force_samples: list[list[float]] = field(default_factory=list)
    ee_path: list[list[float]] = field(default_factory=list)
    last_contact_centroid: list[float] | None = None

    @property
    def max_force(self) -> float:
        return max((max(s) for s in self.force_samples if s), default=0.0)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ReachOutcome":
        return cls(**d)


@dataclass
class TrialResult:
    trial_id: str
    controller: str
    reaches: list[ReachOutcome]

    @property
    def success(self) -> bool:
        return any(r.success for r in self.reaches)

    @property
    def forces(self) -> list[float]:
        return [f for r in self.reaches for s in r.force_samples for f in s]

    @property
    def max_force(self) -> float:
        return max((r.max_force for r in self.reaches), default=0.0)

    def first_reach(self) -> "TrialResult":
        return TrialResult(self.trial_id, self.controller, self.reaches[:1])

    def to_dict(self) -> dict:
        return {"trial_id": self.trial_id, "controller": self.controller,
                "reaches": [r.to_dict() for r in self.reaches]}

    @classmethod
    def from_dict(cls, d: dict) -> "TrialResult":
        return cls(d["trial_id"], d["controller"], [ReachOutcome.from_dict(r) for r in d["reaches"]])


class TrialLog:
    """Line-delimited JSON records; kept in memory when no stream is given."""

    def __init__(self, stream: IO[str] | None = None):
        self.stream = stream
        self.records: list[dict] = []

    @classmethod
    def open(cls, path: str | Path) -> "TrialLog":
        return cls(open(path, "w"))

    def write(self, record: dict):
        if self.stream is None:
            self.records.append(record)
        else:
            self.stream.write(json.dumps(record, separators=(",", ":")) + "\n")

    def close(self):
        if self.stream is not None:
            self.stream.close()


def make_controller(kind: str, config: Config, goal):
    try:
        cls = CONTROLLERS[kind]
    except KeyError:
        raise ValueError(f"unknown controller {kind!r}; expected one of {sorted(CONTROLLERS)}") from None
    return cls(config.arm, dataclasses.replace(config.controller, goal=tuple(goal)))


def _centroid(skin) -> list[float] | None:
    total = sum(r.normal_force for r in skin)
    if total <= 0:
        return None
    c = sum(r.normal_force * r.center for r in skin) / total
    return [float(c[0]), float(c[1])]


def run_reach(world: WorldState, controller, config: Config, goal, *, waypoint=None,
              max_duration: float | None = None, detect_stagnation: bool = True,
              log: TrialLog | None = None, reach_index: int = 0,
              phase: str = "reach") -> tuple[ReachOutcome, WorldState]:
    """Alternate controller decisions and plant periods until the reach ends."""
    h = config.harness
    arm = config.arm
    dt = config.world.dt_outer
    goal = np.asarray(goal, dtype=float)
    n_max = int(round((h.max_duration if max_duration is None else max_duration) / dt))
    n_window = int(round(h.stagnation_window / dt))
    n_waypoint = int(round(h.waypoint_timeout / dt))
    skin = skin_reading(world, arm, pitch=config.world.taxel_pitch, active_only=True)
    outcome = ReachOutcome(False, "timeout", 0.0)
    t0 = world.time
    step = 0
    while True:
        x_h = forward_kinematics(arm, world.theta)[-1]
        outcome.force_samples.append([r.normal_force for r in skin])
        outcome.ee_path.append([float(x_h[0]), float(x_h[1])])
        events = []
        if waypoint is not None and (np.hypot(*(x_h - waypoint)) < h.success_eps or step >= n_waypoint):
            waypoint = None
            events.append("waypoint_done")
        target = goal if waypoint is None else waypoint
        decision = controller.step(world.theta, world.phi, skin, goal=target)
        reason = None
        if decision.halted:
            reason = "safety_halt" if decision.halt == "safety" else "sim_fault"
            events.append(f"halt:{decision.halt}")
        elif np.hypot(*(x_h - goal)) < h.success_eps:
            reason = "reached"
        elif step >= n_max:
            reason = "timeout"
        elif detect_stagnation and step >= n_window and \
                np.hypot(*(x_h - np.asarray(outcome.ee_path[-1 - n_window]))) < h.stagnation_eps:
            reason = "stagnated"
        dphi = None if reason else decision.delta_phi
        if log is not None:
            log.write({
                "t": world.time, "reach": reach_index, "phase": phase,
                "theta": world.theta.tolist(), "phi": world.phi.tolist(),
                "dphi": None if dphi is None else dphi.tolist(),
                "ee": outcome.ee_path[-1],
                "forces": [[*r.taxel_id, r.normal_force] for r in skin],
                "qp": decision.qp_status, "n_active": decision.n_active,
                "events": events + ([f"end:{reason}"] if reason else []),
            })
        if reason:
            break
        try:
            world, skin = simulate_outer_step(world, arm, dphi, config.world)
        except SimulationFault:
            reason = "sim_fault"
            if log is not None:
                log.write({"t": world.time, "reach": reach_index, "phase": phase, "events": ["end:sim_fault"]})
            break
        step += 1

    outcome.reason = reason
    outcome.success = reason == "reached"
    outcome.duration = world.time - t0
    outcome.last_contact_centroid = _centroid(skin)
    if reason == "safety_halt":
        world = _hold(world, config, log, reach_index, round(h.halt_hold / dt))
    return outcome, world


def _hold(world: WorldState, config: Config, log: TrialLog | None, reach_index: int, n_steps: int) -> WorldState:
    # after a halt the virtual trajectory is frozen; keep simulating briefly for the log
    zero = np.zeros(config.arm.n_joints)
    for _ in range(n_steps):
        try:
            world, skin = simulate_outer_step(world, config.arm, zero, config.world)
        except SimulationFault:
            break
        if log is not None:
            log.write({"t": world.time, "reach": reach_index, "phase": "hold",
                       "theta": world.theta.tolist(), "phi": world.phi.tolist(), "dphi": zero.tolist(),
                       "forces": [[*r.taxel_id, r.normal_force] for r in skin], "events": []})
    return world


def _retry_waypoint(x_h, goal, centroid, previous_side: float | None, offset: float):
    line = np.asarray(goal) - x_h
    dist = float(np.hypot(*line))
    if dist < 1e-9:
        return None, previous_side
    perp = np.array([-line[1], line[0]]) / dist
    if previous_side is None:
        side = 1.0
        if centroid is not None:
            # start on the side away from where the arm got stuck
            side = -1.0 if float(perp @ (np.asarray(centroid) - x_h)) > 0 else 1.0
    else:
        side = -previous_side
    return x_h + 0.5 * line + side * offset * perp, side


def supervise(spec: TrialSpec, controller: str, config: Config, max_reaches: int | None = None,
              log: TrialLog | None = None) -> TrialResult:
    """Reach, and on failure pull out towards the start and retry with a lateral waypoint."""
    max_reaches = config.harness.max_reaches if max_reaches is None else max_reaches
    if max_reaches < 1:
        raise ValueError("max_reaches must be at least 1")
    world = spec.build_world(config.world)
    x_start = forward_kinematics(config.arm, world.theta)[-1]
    if log is not None:
        log.write({"event": "trial_start", "trial": spec.trial_id, "controller": controller,
                   "goal": list(spec.goal), "max_reaches": max_reaches})
    reaches: list[ReachOutcome] = []
    side = None
    for k in range(max_reaches):
        waypoint = None
        if k > 0:
            _, world = run_reach(world, make_controller(controller, config, x_start), config, x_start,
                                 max_duration=config.harness.pullout_duration, detect_stagnation=False,
                                 log=log, reach_index=k - 1, phase="pullout")
            x_h = forward_kinematics(config.arm, world.theta)[-1]
            waypoint, side = _retry_waypoint(x_h, spec.goal, reaches[-1].last_contact_centroid, side,
                                             config.harness.retry_offset)
        outcome, world = run_reach(world, make_controller(controller, config, spec.goal), config, spec.goal,
                                   waypoint=waypoint, log=log, reach_index=k)
        reaches.append(outcome)
        if log is not None:
            log.write({"event": "reach_end", "reach": k, "reason": outcome.reason,
                       "duration": outcome.duration, "success": outcome.success,
                       "centroid": outcome.last_contact_centroid})
        if outcome.success or outcome.reason == "sim_fault":
            break
    result = TrialResult(spec.trial_id, controller, reaches)
    if log is not None:
        log.write({"event": "trial_end", "trial": spec.trial_id, "success": result.success})
    return result
