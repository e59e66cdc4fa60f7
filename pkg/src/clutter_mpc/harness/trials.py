"""Random cluttered scenes: obstacles and a goal sampled uniformly in the workspace."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import _kernels
from ..arm import ArmModel
from ..config import Config
from ..world import Obstacle, WorldConfig, WorldState

__all__ = ["TrialSpec", "TrialGenerationError", "generate_trial", "trial_rng", "save_trials", "load_trials"]


class TrialGenerationError(RuntimeError):
    """Rejection sampling could not place an obstacle (scene is overcrowded)."""


@dataclass(frozen=True)
class TrialSpec:
    seed: int
    n_fixed: int
    n_movable: int
    workspace: tuple[float, float, float, float]
    obstacles: tuple[tuple[tuple[float, float], str], ...]
    goal: tuple[float, float]
    obstacle_radius: float
    initial_theta: tuple[float, ...]

    @property
    def trial_id(self) -> str:
        return f"{self.seed:08d}_f{self.n_fixed}_m{self.n_movable}"

    def build_world(self, world: WorldConfig = WorldConfig()) -> WorldState:
        obstacles = [
            Obstacle(center, self.obstacle_radius, kind, world.surface_stiffness,
                     world.friction_threshold, world.mobility_gain)
            for center, kind in self.obstacles
        ]
        return WorldState.at_rest(np.array(self.initial_theta), obstacles)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_fixed": self.n_fixed,
            "n_movable": self.n_movable,
            "workspace": list(self.workspace),
            "obstacles": [{"center": list(c), "kind": k} for c, k in self.obstacles],
            "goal": list(self.goal),
            "obstacle_radius": self.obstacle_radius,
            "initial_theta": list(self.initial_theta),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialSpec":
        return cls(
            seed=int(d["seed"]),
            n_fixed=int(d["n_fixed"]),
            n_movable=int(d["n_movable"]),
            workspace=tuple(d["workspace"]),
            obstacles=tuple(((float(o["center"][0]), float(o["center"][1])), o["kind"]) for o in d["obstacles"]),
            goal=(float(d["goal"][0]), float(d["goal"][1])),
            obstacle_radius=float(d["obstacle_radius"]),
            initial_theta=tuple(float(v) for v in d["initial_theta"]),
        )


def trial_rng(seed: int) -> np.random.Generator:
    """Counter-based generator private to one trial."""
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))


def _clear_of_arm(arm: ArmModel, theta: np.ndarray, center, radius: float) -> bool:
    count = _kernels.find_contacts(arm.link_lengths, arm.link_radius, theta,
                                   np.array([center], dtype=float), np.array([radius]))[0]
    return count == 0


def generate_trial(seed: int, n_fixed: int, n_movable: int, config: Config = Config()) -> TrialSpec:
    """Place fixed then movable obstacles, then the goal, by rejection sampling."""
    if n_fixed < 0 or n_movable < 0:
        raise ValueError("obstacle counts must be non-negative")
    h = config.harness
    arm = config.arm
    rng = trial_rng(seed)
    lo = np.array(h.workspace[:2])
    hi = np.array(h.workspace[2:])
    r = h.obstacle_radius
    theta0 = np.array(h.initial_theta)
    centers: list[np.ndarray] = []
    kinds = ["fixed"] * n_fixed + ["movable"] * n_movable
    for idx, kind in enumerate(kinds):
        for _ in range(h.max_attempts):
            c = rng.uniform(lo, hi)
            if all(np.hypot(*(c - p)) > 2 * r for p in centers) and _clear_of_arm(arm, theta0, c, r):
                centers.append(c)
                break
        else:
            raise TrialGenerationError(
                f"seed {seed}: no free spot for obstacle {idx} after {h.max_attempts} attempts")
    for _ in range(h.max_attempts):
        g = rng.uniform(lo, hi)
        if all(np.hypot(*(g - p)) > r + arm.link_radius for p in centers):
            break
    else:
        raise TrialGenerationError(f"seed {seed}: no free spot for the goal")
    return TrialSpec(
        seed=int(seed),
        n_fixed=n_fixed,
        n_movable=n_movable,
        workspace=h.workspace,
        obstacles=tuple(((float(c[0]), float(c[1])), k) for c, k in zip(centers, kinds)),
        goal=(float(g[0]), float(g[1])),
        obstacle_radius=r,
        initial_theta=h.initial_theta,
    )


def save_trials(specs, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for spec in specs:
        path = directory / f"trial_{spec.trial_id}.json"
        path.write_text(json.dumps(spec.to_dict(), indent=1))
        paths.append(path)
    return paths


def load_trials(directory: str | Path) -> list[TrialSpec]:
    paths = sorted(Path(directory).glob("trial_*.json"))
    return [TrialSpec.from_dict(json.loads(p.read_text())) for p in paths]
