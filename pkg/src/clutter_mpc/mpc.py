"""One-step model predictive controller driven by whole-arm tactile sensing.

Every control period the controller linearises the arm and its contacts into
``theta(k+1) = theta(k) + B dphi`` with::

    B = (Kj + sum_i J_i' k_i n_i n_i' J_i)^-1 Kj

and solves a QP in the virtual-trajectory increment ``dphi``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qp
from .arm import ArmModel, ee_jacobian, forward_kinematics, joint_limit_margins, point_jacobian
from .world import TaxelReading

__all__ = [
    "FragileRegion",
    "ControllerParams",
    "ContactRecord",
    "StepDecision",
    "desired_delta_x",
    "assemble_model",
    "predicted_quantities",
    "build_qp",
    "estimate_stiffness",
    "threshold_for_location",
    "MpcController",
]


@dataclass(frozen=True)
class FragileRegion:
    center: tuple[float, float]
    radius: float
    f_thresh: float = 2.0

    def contains(self, point) -> bool:
        return math.hypot(point[0] - self.center[0], point[1] - self.center[1]) <= self.radius


@dataclass(frozen=True)
class ControllerParams:
    goal: tuple[float, float] = (0.5, 0.0)
    k_default: float = 5000.0
    f_thresh: float = 5.0
    fragile_regions: tuple[FragileRegion, ...] = ()
    f_rate: float = 1.0
    f_safety: float = 100.0
    d_w: float = 0.0005
    alpha1: float = 1.0
    alpha2: float = 1e-5
    alpha3: float = 10.0
    dphi_max: float = 0.05
    g3_decrease: float = 0.5
    activation_force: float = 0.1
    online_stiffness: bool = False
    estimator_window: int = 20
    estimator_min_samples: int = 5
    estimator_min_spread: float = 1e-4
    k_min: float = 50.0
    k_max: float = 10000.0
    pinv_reg: float = 1e-8
    qp_tol: float = 1e-8
    qp_max_iter: int = 200

    def __post_init__(self):
        object.__setattr__(self, "goal", (float(self.goal[0]), float(self.goal[1])))
        regions = tuple(r if isinstance(r, FragileRegion) else FragileRegion(**r)
                        for r in self.fragile_regions)
        object.__setattr__(self, "fragile_regions", regions)
        thresholds = [self.f_thresh] + [r.f_thresh for r in regions]
        if not all(0 < t <= self.f_safety for t in thresholds):
            raise ValueError("force thresholds must satisfy 0 < f_thresh <= f_safety")
        if not self.d_w > 0:
            raise ValueError("d_w must be positive")
        if not self.alpha1 > 0 or self.alpha2 < 0 or self.alpha3 < 0:
            raise ValueError("weights need alpha1 > 0 and alpha2, alpha3 >= 0")
        if not self.k_min <= self.k_default <= self.k_max:
            raise ValueError("need k_min <= k_default <= k_max")
        if not self.dphi_max > 0 or not self.f_rate > 0:
            raise ValueError("dphi_max and f_rate must be positive")

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["goal"] = list(self.goal)
        out["fragile_regions"] = [{"center": list(r.center), "radius": r.radius, "f_thresh": r.f_thresh}
                                  for r in self.fragile_regions]
        return out


@dataclass
class ContactRecord:
    taxel_id: tuple[int, int, int]
    location: np.ndarray
    normal: np.ndarray
    normal_force: float
    jacobian: np.ndarray
    stiffness: float
    f_thresh: float
    history: Sequence[tuple[float, float]] = ()

    @property
    def link_index(self) -> int:
        return self.taxel_id[0]

    @property
    def force(self) -> np.ndarray:
        return self.normal_force * self.normal


@dataclass
class StepDecision:
    """Either an increment ``delta_phi`` or a halt with ``halt`` naming the reason."""

    delta_phi: np.ndarray | None
    halt: str | None = None
    qp_status: str = "none"
    n_active: int = 0
    n_contacts: int = 0
    objective: float = 0.0
    relaxed: bool = False

    @property
    def halted(self) -> bool:
        return self.halt is not None


def desired_delta_x(x_h, x_g, d_w: float) -> np.ndarray:
    """Straight-line waypoint towards the goal, at most ``d_w`` long."""
    diff = np.asarray(x_g, dtype=float) - np.asarray(x_h, dtype=float)
    dist = float(np.linalg.norm(diff))
    if dist > d_w:
        return d_w * diff / dist
    return diff


def _joint_stiffness_sum(arm: ArmModel, contacts: Sequence[ContactRecord]) -> np.ndarray:
    total = np.array(arm.stiffness_matrix)
    for c in contacts:
        jn = c.normal @ c.jacobian
        total += c.stiffness * np.outer(jn, jn)
    return total


def assemble_model(arm: ArmModel, theta, contacts: Sequence[ContactRecord]) -> np.ndarray:
    """Quasi-static input matrix B mapping dphi to the predicted joint change."""
    del theta  # the contact Jacobians already carry the configuration
    lhs = _joint_stiffness_sum(arm, contacts)
    try:
        B = np.linalg.solve(lhs, arm.stiffness_matrix)
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError("joint + contact stiffness is singular") from exc
    if not np.all(np.isfinite(B)):
        raise FloatingPointError("non-finite model matrix")
    return B


def predicted_quantities(B: np.ndarray, arm: ArmModel, theta, contacts: Sequence[ContactRecord]):
    """Linear maps of dphi: joint change, hand motion, and per-contact normal-force change."""
    J_h = ee_jacobian(arm, theta)
    M_f = np.array([c.stiffness * (c.normal @ c.jacobian) @ B for c in contacts]).reshape(len(contacts), arm.n_joints)
    return B, J_h @ B, M_f


def build_qp(theta, x_h, contacts: Sequence[ContactRecord], params: ControllerParams, arm: ArmModel,
             phi=None, *, goal=None, rate_scale: float = 1.0) -> tuple[qp.QpProblem, list[str]]:
    """QP in dphi plus a label per inequality row.

    The cost is ``0.5 x'Hx + f'x``; the g1 term carries the same Tikhonov term
    as the baseline pseudoinverse so both agree in free space.
    """
    theta = np.asarray(theta, dtype=float)
    phi = theta if phi is None else np.asarray(phi, dtype=float)
    m = arm.n_joints
    goal = params.goal if goal is None else goal
    B = assemble_model(arm, theta, contacts)
    M_theta, M_x, M_f = predicted_quantities(B, arm, theta, contacts)
    dx_d = desired_delta_x(x_h, goal, params.d_w)
    Kj = arm.stiffness_matrix

    H = params.alpha1 * (M_x.T @ M_x + params.pinv_reg * np.eye(m)) + params.alpha2 * (Kj.T @ Kj)
    f = -params.alpha1 * (M_x.T @ dx_d)

    rows, bounds, labels = [], [], []

    def add(row, bound, label):
        rows.append(row)
        bounds.append(bound)
        labels.append(label)

    dth_min, dth_max = joint_limit_margins(arm, theta)
    for j in range(m):
        add(M_theta[j], dth_max[j], "joint_max")
        add(-M_theta[j], -dth_min[j], "joint_min")

    rate = params.f_rate * rate_scale
    for i, c in enumerate(contacts):
        if c.normal_force > c.f_thresh:
            add(M_f[i], 0.0, "force_hold")
            add(-M_f[i], rate, "force_rate_min")
            target = -params.g3_decrease
            H = H + params.alpha3 * np.outer(M_f[i], M_f[i])
            f = f - params.alpha3 * target * M_f[i]
        else:
            add(M_f[i], min(rate, c.f_thresh - c.normal_force), "force_max")
            add(-M_f[i], rate, "force_rate_min")

    eye = np.eye(m)
    for j in range(m):
        add(eye[j], params.dphi_max, "dphi_max")
        add(-eye[j], params.dphi_max, "dphi_min")
    for j in range(m):
        add(eye[j], arm.joint_max[j] - phi[j], "phi_max")
        add(-eye[j], phi[j] - arm.joint_min[j], "phi_min")

    # objective is sum_i alpha_i g_i = x'(H)x + 2 f'x + const, hence the factor 2
    problem = qp.QpProblem(2.0 * H, 2.0 * f, np.array(rows).reshape(-1, m), np.array(bounds))
    return problem, labels


def estimate_stiffness(history: Sequence[tuple[float, float]], current: float,
                       params: ControllerParams = ControllerParams()) -> float:
    """Least-squares slope of normal force against normal displacement, clamped."""
    if len(history) < params.estimator_min_samples:
        return current
    data = np.asarray(history, dtype=float)
    disp, force = data[:, 0], data[:, 1]
    if np.ptp(disp) <= params.estimator_min_spread:
        return current
    dc = disp - disp.mean()
    slope = float(dc @ (force - force.mean()) / (dc @ dc))
    return float(np.clip(slope, params.k_min, params.k_max))


def threshold_for_location(params: ControllerParams, location) -> float:
    for region in params.fragile_regions:
        if region.contains(location):
            return region.f_thresh
    return params.f_thresh


class MpcController:
    """Stateful wrapper: safety latch and per-taxel stiffness histories."""

    name = "mpc"

    def __init__(self, arm: ArmModel, params: ControllerParams):
        self.arm = arm
        self.params = params
        self.reset()

    def reset(self):
        self.halted: str | None = None
        self._history: dict[tuple, deque] = {}
        self._last_location: dict[tuple, np.ndarray] = {}
        self._stiffness: dict[tuple, float] = {}

    def _contacts(self, theta, active: Sequence[TaxelReading]) -> list[ContactRecord]:
        p = self.params
        seen = set()
        records = []
        for r in active:
            tid = r.taxel_id
            seen.add(tid)
            hist = self._history.get(tid)
            if hist is None:
                hist = self._history[tid] = deque(maxlen=p.estimator_window)
                disp = 0.0
                self._stiffness[tid] = p.k_default
            else:
                disp = hist[-1][0] + float(r.normal @ (r.center - self._last_location[tid]))
            hist.append((disp, r.normal_force))
            self._last_location[tid] = np.asarray(r.center)
            if p.online_stiffness:
                self._stiffness[tid] = estimate_stiffness(hist, self._stiffness[tid], p)
            records.append(ContactRecord(
                taxel_id=tid,
                location=np.asarray(r.center),
                normal=np.asarray(r.normal),
                normal_force=r.normal_force,
                jacobian=point_jacobian(self.arm, theta, tid[0], r.center),
                stiffness=self._stiffness[tid],
                f_thresh=threshold_for_location(p, r.center),
                history=hist,
            ))
        for tid in [t for t in self._history if t not in seen]:
            # contact broken: forget the history
            del self._history[tid], self._last_location[tid], self._stiffness[tid]
        return records

    def step(self, theta, phi, skin: Sequence[TaxelReading], goal=None) -> StepDecision:
        p = self.params
        if self.halted:
            return StepDecision(None, self.halted)
        if any(r.normal_force > p.f_safety for r in skin):
            self.halted = "safety"
            return StepDecision(None, "safety")
        theta = np.asarray(theta, dtype=float)
        active = [r for r in skin if r.normal_force > p.activation_force]
        contacts = self._contacts(theta, active)
        x_h = forward_kinematics(self.arm, theta)[-1]
        try:
            problem, labels = build_qp(theta, x_h, contacts, p, self.arm, phi, goal=goal)
            sol = qp.solve(problem, p.qp_tol, p.qp_max_iter)
            relaxed = False
            if sol.status == "infeasible":
                problem, labels = build_qp(theta, x_h, contacts, p, self.arm, phi, goal=goal, rate_scale=2.0)
                sol = qp.solve(problem, p.qp_tol, p.qp_max_iter)
                relaxed = True
        except (FloatingPointError, np.linalg.LinAlgError):
            self.halted = "solver_fault"
            return StepDecision(None, "solver_fault", n_contacts=len(contacts))
        if not np.all(np.isfinite(sol.x)):
            self.halted = "solver_fault"
            return StepDecision(None, "solver_fault", n_contacts=len(contacts))
        feasible = np.all(problem.G @ sol.x <= problem.h + 1e-6)
        if sol.status == "infeasible" or not feasible:
            dphi = np.zeros(self.arm.n_joints)
        else:
            dphi = np.clip(sol.x, -p.dphi_max, p.dphi_max)
        return StepDecision(dphi, None, sol.status, len(sol.active), len(contacts), sol.objective, relaxed)
