"""Nested experiment configuration with YAML round-tripping.

Sections mirror the package layout: ``arm``, ``world``, ``controller`` and
``harness``. Any key left out of a file keeps its default.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .arm import ArmModel
from .mpc import ControllerParams
from .world import WorldConfig

__all__ = ["HarnessConfig", "Config", "load_config", "dump_config"]


@dataclass(frozen=True)
class HarnessConfig:
    # workspace rectangle (x_min, y_min, x_max, y_max); 0.45 m x 0.60 m = 0.27 m^2
    workspace: tuple[float, float, float, float] = (0.2, -0.3, 0.65, 0.3)
    obstacle_radius: float = 0.01
    # folded below the workspace, every link outside it, 0.3 rad or more from each limit
    initial_theta: tuple[float, ...] = (-1.7, 1.0, 2.4)
    max_attempts: int = 10_000
    success_eps: float = 0.025
    stagnation_eps: float = 0.01
    stagnation_window: float = 2.0
    max_duration: float = 30.0
    pullout_duration: float = 5.0
    retry_offset: float = 0.05
    waypoint_timeout: float = 5.0
    halt_hold: float = 0.1
    max_reaches: int = 6

    def __post_init__(self):
        object.__setattr__(self, "workspace", tuple(float(v) for v in self.workspace))
        object.__setattr__(self, "initial_theta", tuple(float(v) for v in self.initial_theta))
        x0, y0, x1, y1 = self.workspace
        if not (x1 > x0 and y1 > y0):
            raise ValueError("workspace must have positive extent")
        if self.max_reaches < 1:
            raise ValueError("max_reaches must be at least 1")

    @property
    def workspace_area(self) -> float:
        x0, y0, x1, y1 = self.workspace
        return (x1 - x0) * (y1 - y0)


@dataclass(frozen=True)
class Config:
    arm: ArmModel = field(default_factory=ArmModel)
    world: WorldConfig = field(default_factory=WorldConfig)
    controller: ControllerParams = field(default_factory=ControllerParams)
    harness: HarnessConfig = field(default_factory=HarnessConfig)

    def to_dict(self) -> dict:
        harness = dataclasses.asdict(self.harness)
        harness["workspace"] = list(self.harness.workspace)
        harness["initial_theta"] = list(self.harness.initial_theta)
        return {
            "arm": self.arm.to_dict(),
            "world": dataclasses.asdict(self.world),
            "controller": self.controller.to_dict(),
            "harness": harness,
        }

    @classmethod
    def from_dict(cls, data: dict | None) -> "Config":
        data = data or {}
        unknown = set(data) - {"arm", "world", "controller", "harness"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        return cls(
            arm=ArmModel(**data.get("arm", {})),
            world=WorldConfig(**data.get("world", {})),
            controller=ControllerParams(**data.get("controller", {})),
            harness=HarnessConfig(**data.get("harness", {})),
        )

    def replace(self, **sections) -> "Config":
        """Override individual fields, e.g. ``cfg.replace(controller={"f_thresh": 3.0})``."""
        out = self
        for name, changes in sections.items():
            out = dataclasses.replace(out, **{name: _replace_section(getattr(out, name), changes)})
        return out


def _replace_section(section, changes: dict):
    if isinstance(section, ArmModel):
        base = section.to_dict()
        if "joint_damping" not in changes and {"joint_stiffness", "link_mass", "link_lengths"} & set(changes):
            base.pop("joint_damping")  # re-derive near-critical damping
        return ArmModel.from_dict({**base, **changes})
    return dataclasses.replace(section, **changes)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    with open(path) as fh:
        return Config.from_dict(yaml.safe_load(fh))


def dump_config(config: Config, path: str | Path | None = None) -> str:
    text = yaml.safe_dump(config.to_dict(), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text
