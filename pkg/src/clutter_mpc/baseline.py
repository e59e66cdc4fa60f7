"""Jacobian pseudoinverse controller that ignores the skin except for the safety stop."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .arm import ArmModel, ee_jacobian, forward_kinematics
from .mpc import ControllerParams, StepDecision, desired_delta_x
from .world import TaxelReading

__all__ = ["baseline_step", "BaselineController"]


def baseline_step(theta, x_h, skin: Sequence[TaxelReading], params: ControllerParams, arm: ArmModel,
                  phi=None, goal=None) -> StepDecision:
    """dphi = (J'J + eps I)^-1 J' dx_d, clipped to the step bounds and joint limits."""
    if any(r.normal_force > params.f_safety for r in skin):
        return StepDecision(None, "safety")
    theta = np.asarray(theta, dtype=float)
    phi = theta if phi is None else np.asarray(phi, dtype=float)
    goal = params.goal if goal is None else goal
    J = ee_jacobian(arm, theta)
    dx_d = desired_delta_x(x_h, goal, params.d_w)
    dphi = np.linalg.solve(J.T @ J + params.pinv_reg * np.eye(arm.n_joints), J.T @ dx_d)
    dphi = np.clip(dphi, -params.dphi_max, params.dphi_max)
    dphi = np.clip(phi + dphi, arm.joint_min, arm.joint_max) - phi
    return StepDecision(dphi, None, "pinv")


class BaselineController:
    name = "baseline"

    def __init__(self, arm: ArmModel, params: ControllerParams):
        self.arm = arm
        self.params = params
        self.reset()

    def reset(self):
        self.halted: str | None = None

    def step(self, theta, phi, skin: Sequence[TaxelReading], goal=None) -> StepDecision:
        if self.halted:
            return StepDecision(None, self.halted)
        x_h = forward_kinematics(self.arm, theta)[-1]
        decision = baseline_step(theta, x_h, skin, self.params, self.arm, phi, goal)
        if decision.halted:
            self.halted = decision.halt
        return decision
