"""Kinematics of the simulated planar arm.

Joint angles are relative (each joint rotates everything distal to it), the
base sits at the origin, and the zero configuration points along +x.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "ArmModel",
    "as_joint_vector",
    "forward_kinematics",
    "link_angles",
    "point_jacobian",
    "ee_jacobian",
    "joint_limit_margins",
]


def _vec(values) -> np.ndarray:
    return np.array(values, dtype=float).reshape(-1)


def _inertia_surrogate(lengths: np.ndarray, masses: np.ndarray) -> np.ndarray:
    # I_i = sum_{j>=i} m_j * (distance from joint i to centre of link j)^2,
    # evaluated in the zero configuration.
    m = len(lengths)
    starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    centres = starts + 0.5 * lengths
    inertia = np.empty(m)
    for i in range(m):
        inertia[i] = np.sum(masses[i:] * (centres[i:] - starts[i]) ** 2)
    return inertia


@dataclass(frozen=True, eq=False)
class ArmModel:
    """Geometry, limits and joint impedance of a planar serial arm.

    ``joint_damping`` defaults to near-critical damping of each joint treated
    as a decoupled second-order system around the inertia surrogate.
    """

    link_lengths: np.ndarray = field(default_factory=lambda: _vec([0.3, 0.3, 0.2]))
    joint_min: np.ndarray = field(default_factory=lambda: _vec([-2.0, -2.4, 0.0]))
    joint_max: np.ndarray = field(default_factory=lambda: _vec([2.0, 2.4, 2.7]))
    joint_stiffness: np.ndarray = field(default_factory=lambda: _vec([30.0, 20.0, 15.0]))
    joint_damping: np.ndarray | None = None
    link_radius: float = 0.02
    link_mass: np.ndarray = field(default_factory=lambda: _vec([2.0, 1.0, 0.5]))

    def __post_init__(self):
        for name in ("link_lengths", "joint_min", "joint_max", "joint_stiffness", "link_mass"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        m = len(self.link_lengths)
        if m < 1:
            raise ValueError("arm needs at least one link")
        for name in ("joint_min", "joint_max", "joint_stiffness", "link_mass"):
            if len(getattr(self, name)) != m:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {m}")
        if self.joint_damping is None:
            damping = 2.0 * np.sqrt(self.joint_stiffness * _inertia_surrogate(self.link_lengths, self.link_mass))
        else:
            damping = _vec(self.joint_damping)
            if len(damping) != m:
                raise ValueError(f"joint_damping has length {len(damping)}, expected {m}")
        object.__setattr__(self, "joint_damping", damping)
        object.__setattr__(self, "link_radius", float(self.link_radius))

        positive = {
            "link_lengths": self.link_lengths,
            "joint_stiffness": self.joint_stiffness,
            "joint_damping": self.joint_damping,
            "link_mass": self.link_mass,
            "link_radius": np.array([self.link_radius]),
        }
        for name, arr in positive.items():
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise ValueError(f"{name} must be finite and positive")
        if np.any(self.joint_min >= self.joint_max):
            raise ValueError("joint_min must be below joint_max for every joint")
        for arr in (self.link_lengths, self.joint_min, self.joint_max, self.joint_stiffness,
                    self.joint_damping, self.link_mass):
            arr.setflags(write=False)

    @property
    def n_joints(self) -> int:
        return len(self.link_lengths)

    @property
    def reach(self) -> float:
        return float(np.sum(self.link_lengths))

    @cached_property
    def inertia(self) -> np.ndarray:
        """Configuration-independent diagonal inertia used by the plant."""
        inertia = _inertia_surrogate(self.link_lengths, self.link_mass)
        inertia.setflags(write=False)
        return inertia

    @cached_property
    def stiffness_matrix(self) -> np.ndarray:
        kj = np.diag(self.joint_stiffness)
        kj.setflags(write=False)
        return kj

    def to_dict(self) -> dict:
        return {
            "link_lengths": self.link_lengths.tolist(),
            "joint_min": self.joint_min.tolist(),
            "joint_max": self.joint_max.tolist(),
            "joint_stiffness": self.joint_stiffness.tolist(),
            "joint_damping": self.joint_damping.tolist(),
            "link_radius": self.link_radius,
            "link_mass": self.link_mass.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArmModel":
        return cls(**data)


def as_joint_vector(q, arm: ArmModel) -> np.ndarray:
    """Validate ``q`` as a finite joint vector for ``arm``."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.shape[0] != arm.n_joints:
        raise ValueError(f"joint vector has shape {q.shape}, arm has {arm.n_joints} joints")
    if not np.all(np.isfinite(q)):
        raise ValueError("joint vector has non-finite entries")
    return q


def link_angles(q: np.ndarray) -> np.ndarray:
    """Absolute orientation of every link."""
    return np.cumsum(q)


def forward_kinematics(arm: ArmModel, q) -> np.ndarray:
    """Joint positions followed by the end effector, shape ``(m + 1, 2)``."""
    q = as_joint_vector(q, arm)
    angles = link_angles(q)
    steps = arm.link_lengths[:, None] * np.column_stack([np.cos(angles), np.sin(angles)])
    points = np.zeros((arm.n_joints + 1, 2))
    points[1:] = np.cumsum(steps, axis=0)
    return points


def point_jacobian(arm: ArmModel, q, link_index: int, point) -> np.ndarray:
    """2 x m Jacobian of a point rigidly attached to link ``link_index``."""
    if not 0 <= link_index < arm.n_joints:
        raise IndexError(f"link_index {link_index} out of range for {arm.n_joints} links")
    joints = forward_kinematics(arm, q)
    point = np.asarray(point, dtype=float)
    lever = point - joints[: link_index + 1]
    jac = np.zeros((2, arm.n_joints))
    jac[0, : link_index + 1] = -lever[:, 1]
    jac[1, : link_index + 1] = lever[:, 0]
    return jac


def ee_jacobian(arm: ArmModel, q) -> np.ndarray:
    joints = forward_kinematics(arm, q)
    lever = joints[-1] - joints[:-1]
    return np.vstack([-lever[:, 1], lever[:, 0]])


def joint_limit_margins(arm: ArmModel, q) -> tuple[np.ndarray, np.ndarray]:
    """Signed distance to the lower and upper joint limits (``min - q``, ``max - q``)."""
    q = as_joint_vector(q, arm)
    return arm.joint_min - q, arm.joint_max - q
