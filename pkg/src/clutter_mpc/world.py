"""Planar plant: circular obstacles, penalty contacts, impedance servo, tactile skin."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np

from . import _kernels
from .arm import ArmModel, as_joint_vector, forward_kinematics, link_angles

__all__ = [
    "Obstacle",
    "WorldConfig",
    "WorldState",
    "RawContact",
    "TaxelReading",
    "TaxelLayout",
    "SimulationFault",
    "taxel_layout",
    "detect_contacts",
    "contact_forces",
    "update_movable",
    "step_inner",
    "skin_reading",
    "simulate_outer_step",
    "mechanical_energy",
]


class SimulationFault(RuntimeError):
    """The plant produced a non-finite state; the trial is aborted."""


@dataclass(frozen=True)
class Obstacle:
    center: tuple[float, float]
    radius: float
    kind: Literal["fixed", "movable"] = "fixed"
    surface_stiffness: float = 5000.0
    friction_threshold: float = 2.0
    mobility_gain: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if self.kind not in ("fixed", "movable"):
            raise ValueError(f"unknown obstacle kind {self.kind!r}")
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")
        if not self.surface_stiffness > 0:
            raise ValueError("surface stiffness must be positive")
        if self.friction_threshold < 0 or self.mobility_gain < 0:
            raise ValueError("friction threshold and mobility gain must be non-negative")

    @property
    def movable(self) -> bool:
        return self.kind == "movable"


@dataclass(frozen=True)
class WorldConfig:
    dt_inner: float = 0.001
    inner_steps: int = 10
    surface_stiffness: float = 5000.0
    friction_threshold: float = 2.0
    mobility_gain: float = 0.05
    taxel_pitch: float = 0.01

    @property
    def dt_outer(self) -> float:
        return self.dt_inner * self.inner_steps


@dataclass(frozen=True, eq=False)
class WorldState:
    theta: np.ndarray
    theta_dot: np.ndarray
    phi: np.ndarray
    obstacles: tuple[Obstacle, ...] = ()
    time: float = 0.0

    def __post_init__(self):
        for name in ("theta", "theta_dot", "phi"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    @classmethod
    def at_rest(cls, theta, obstacles: Sequence[Obstacle] = (), time: float = 0.0) -> "WorldState":
        theta = np.asarray(theta, dtype=float)
        return cls(theta, np.zeros_like(theta), theta.copy(), tuple(obstacles), time)


@dataclass(frozen=True)
class RawContact:
    link_index: int
    point: np.ndarray
    normal: np.ndarray
    depth: float
    obstacle_id: int


@dataclass(frozen=True)
class TaxelReading:
    taxel_id: tuple[int, int, int]
    center: np.ndarray
    normal: np.ndarray
    normal_force: float


@dataclass(frozen=True, eq=False)
class TaxelLayout:
    """Taxel centres and normals in each link's frame.

    Edge index 0 is the +y long edge, 1 the -y long edge, 2 the proximal cap and
    3 the distal cap.
    """

    link: np.ndarray
    edge: np.ndarray
    slot: np.ndarray
    local_pos: np.ndarray
    local_normal: np.ndarray
    by_link: tuple[np.ndarray, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.link)


@lru_cache(maxsize=32)
def taxel_layout(arm: ArmModel, pitch: float = 0.01) -> TaxelLayout:
    links, edges, slots, pos, nrm = [], [], [], [], []
    r = arm.link_radius
    n_cap = max(1, int(round(np.pi * r / pitch)))
    for i, length in enumerate(arm.link_lengths):
        n_edge = max(1, int(round(length / pitch)))
        xs = (np.arange(n_edge) + 0.5) * length / n_edge
        for edge, side in ((0, 1.0), (1, -1.0)):
            for s, x in enumerate(xs):
                links.append(i), edges.append(edge), slots.append(s)
                pos.append((x, side * r))
                nrm.append((0.0, side))
        for edge, start, origin in ((2, 0.5 * np.pi, 0.0), (3, -0.5 * np.pi, length)):
            for s in range(n_cap):
                ang = start + (s + 0.5) * np.pi / n_cap
                links.append(i), edges.append(edge), slots.append(s)
                pos.append((origin + r * np.cos(ang), r * np.sin(ang)))
                nrm.append((np.cos(ang), np.sin(ang)))
    link = np.array(links, dtype=np.int64)
    by_link = tuple(np.flatnonzero(link == i) for i in range(arm.n_joints))
    return TaxelLayout(link, np.array(edges, dtype=np.int64), np.array(slots, dtype=np.int64),
                       np.array(pos), np.array(nrm), by_link)


def _obstacle_arrays(obstacles: Sequence[Obstacle]):
    n = len(obstacles)
    centers = np.array([o.center for o in obstacles], dtype=float).reshape(n, 2)
    radii = np.array([o.radius for o in obstacles], dtype=float)
    stiffness = np.array([o.surface_stiffness for o in obstacles], dtype=float)
    movable = np.array([o.movable for o in obstacles], dtype=np.bool_)
    friction = np.array([o.friction_threshold for o in obstacles], dtype=float)
    gain = np.array([o.mobility_gain for o in obstacles], dtype=float)
    return centers, radii, stiffness, movable, friction, gain


def _raw_contacts(world: WorldState, arm: ArmModel):
    centers, radii = _obstacle_arrays(world.obstacles)[:2]
    count, link, obs, point, normal, depth = _kernels.find_contacts(
        arm.link_lengths, arm.link_radius, world.theta, centers, radii)
    return link[:count], obs[:count], point[:count], normal[:count], depth[:count]


def detect_contacts(world: WorldState, arm: ArmModel) -> list[RawContact]:
    """One contact per overlapping (link, obstacle) pair."""
    link, obs, point, normal, depth = _raw_contacts(world, arm)
    return [RawContact(int(link[c]), point[c].copy(), normal[c].copy(), float(depth[c]), int(obs[c]))
            for c in range(len(link))]


def contact_forces(contacts: Sequence[RawContact], obstacles: Sequence[Obstacle]) -> list[np.ndarray]:
    """Frictionless linear-spring force applied by the arm to each obstacle."""
    return [obstacles[c.obstacle_id].surface_stiffness * c.depth * np.asarray(c.normal) for c in contacts]


def update_movable(obstacle: Obstacle, net_force, dt: float) -> Obstacle:
    """Slide a movable obstacle with velocity proportional to the force above friction."""
    if not obstacle.movable:
        raise ValueError("only movable obstacles can be updated")
    net_force = np.asarray(net_force, dtype=float)
    f = float(np.hypot(net_force[0], net_force[1]))
    if f <= obstacle.friction_threshold:
        return obstacle
    shift = obstacle.mobility_gain * (f - obstacle.friction_threshold) * dt / f * net_force
    return replace(obstacle, center=(obstacle.center[0] + shift[0], obstacle.center[1] + shift[1]))


def _advance(world: WorldState, arm: ArmModel, phi: np.ndarray, dt: float, n_steps: int) -> WorldState:
    if not (np.all(np.isfinite(world.theta)) and np.all(np.isfinite(world.theta_dot))
            and np.all(np.isfinite(phi))):
        raise SimulationFault(f"non-finite state at t={world.time:.3f}")
    arrays = _obstacle_arrays(world.obstacles)
    theta, theta_dot, centers, ok = _kernels.inner_steps(
        arm.link_lengths, arm.link_radius, arm.inertia, arm.joint_stiffness, arm.joint_damping,
        arm.joint_min, arm.joint_max, world.theta, world.theta_dot, phi, *arrays, dt, n_steps)
    if not ok:
        raise SimulationFault(f"integration blew up near t={world.time:.3f}")
    obstacles = list(world.obstacles)
    for o, obstacle in enumerate(obstacles):
        if obstacle.movable and (centers[o, 0], centers[o, 1]) != obstacle.center:
            obstacles[o] = replace(obstacle, center=(centers[o, 0], centers[o, 1]))
    return WorldState(theta, theta_dot, phi, tuple(obstacles), world.time + n_steps * dt)


def step_inner(world: WorldState, arm: ArmModel, dt_inner: float = 0.001) -> WorldState:
    """One tick of the joint impedance loop, tau = Kj (phi - theta) - Dj theta_dot.

    Contact torques are subtracted, theta is clamped to the joint limits and
    movable obstacles are advanced with the contact forces of this tick.
    """
    if not dt_inner > 0:
        raise ValueError("dt_inner must be positive")
    return _advance(world, arm, world.phi, dt_inner, 1)


def simulate_outer_step(world: WorldState, arm: ArmModel, delta_phi,
                        config: WorldConfig = WorldConfig()) -> tuple[WorldState, list[TaxelReading]]:
    """Apply a virtual-trajectory increment and run one controller period.

    Returns the new state and the non-zero taxel readings at the end of the
    period (taxels that are not listed read 0 N).
    """
    delta_phi = as_joint_vector(delta_phi, arm)
    phi = np.clip(world.phi + delta_phi, arm.joint_min, arm.joint_max)
    world = _advance(world, arm, phi, config.dt_inner, config.inner_steps)
    return world, skin_reading(world, arm, pitch=config.taxel_pitch, active_only=True)


def skin_reading(world: WorldState, arm: ArmModel, *, pitch: float = 0.01,
                 active_only: bool = False) -> list[TaxelReading]:
    """Normal force per taxel; each contact is credited to its nearest taxel."""
    layout = taxel_layout(arm, pitch)
    link, obs, point, normal, depth = _raw_contacts(world, arm)
    stiffness = np.array([world.obstacles[o].surface_stiffness for o in obs])
    forces = np.zeros(len(layout))
    joints = forward_kinematics(arm, world.theta)
    angles = link_angles(world.theta)
    cos, sin = np.cos(angles), np.sin(angles)
    for c in range(len(link)):
        i = link[c]
        rel = point[c] - joints[i]
        local = np.array([cos[i] * rel[0] + sin[i] * rel[1], -sin[i] * rel[0] + cos[i] * rel[1]])
        candidates = layout.by_link[i]
        d2 = np.sum((layout.local_pos[candidates] - local) ** 2, axis=1)
        forces[candidates[np.argmin(d2)]] += stiffness[c] * depth[c]
    index = np.flatnonzero(forces > 0) if active_only else np.arange(len(layout))
    readings = []
    for t in index:
        i = layout.link[t]
        rot = np.array([[cos[i], -sin[i]], [sin[i], cos[i]]])
        readings.append(TaxelReading(
            (int(i), int(layout.edge[t]), int(layout.slot[t])),
            joints[i] + rot @ layout.local_pos[t],
            rot @ layout.local_normal[t],
            float(forces[t]),
        ))
    return readings


def mechanical_energy(world: WorldState, arm: ArmModel) -> float:
    """Kinetic + joint-spring + contact-penalty energy."""
    _, obs, _, _, depth = _raw_contacts(world, arm)
    k = np.array([world.obstacles[o].surface_stiffness for o in obs])
    err = world.phi - world.theta
    return float(0.5 * np.sum(arm.inertia * world.theta_dot ** 2)
                 + 0.5 * np.sum(arm.joint_stiffness * err ** 2)
                 + 0.5 * np.sum(k * depth ** 2))
