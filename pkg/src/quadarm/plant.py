"""Per-joint test plant: rigid inertia, viscous damping, optional gravity
load and a one-sided spring-damper ground stop.  Plus ideal-rolling odometry."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Contact:
    ground_level: float             # contact when the angle is below this
    stiffness: float = 5000.0
    damping: float = 50.0
    window: tuple[float, float] | None = None   # (t_on, t_off); None = always

    def __post_init__(self):
        if self.stiffness < 0 or self.damping < 0:
            raise ValueError("contact stiffness and damping must be non-negative")
        if self.window is not None and not self.window[0] < self.window[1]:
            raise ValueError("contact window must satisfy t_on < t_off")

    def active(self, t: float | None) -> bool:
        if self.window is None or t is None:
            return True
        return self.window[0] <= t < self.window[1]


@dataclass(frozen=True)
class PlantParams:
    inertia: float = 0.015
    damping: float = 0.1
    gravity_torque: float = 0.0     # amplitude of g * cos(theta)
    contact: Contact | None = None
    torque_max: float = math.inf

    def __post_init__(self):
        if not self.inertia > 0:
            raise ValueError("inertia must be positive")
        if self.damping < 0:
            raise ValueError("damping must be non-negative")
        if not self.torque_max > 0:
            raise ValueError("torque_max must be positive")


@dataclass
class JointState:
    theta: float = 0.0
    theta_dot: float = 0.0


def contact_torque(state: JointState, contact: Contact | None, t: float | None = None) -> float:
    """Outward torque of the ground stop; never pulls the joint in."""
    if contact is None or not contact.active(t):
        return 0.0
    pen = contact.ground_level - state.theta
    if pen <= 0.0:
        return 0.0
    return max(0.0, contact.stiffness * pen - contact.damping * state.theta_dot)


def actuator_torque(params: PlantParams, tau_cmd: float) -> float:
    tmax = params.torque_max
    return min(max(tau_cmd, -tmax), tmax)


def joint_step(params: PlantParams, state: JointState, tau_cmd: float, T: float,
               t: float | None = None) -> JointState:
    """Semi-implicit Euler: velocity first, then position with the new velocity."""
    tau = actuator_torque(params, tau_cmd)
    load = params.damping * state.theta_dot
    if params.gravity_torque:
        load += params.gravity_torque * math.cos(state.theta)
    tau_c = contact_torque(state, params.contact, t)
    vel = state.theta_dot + T * (tau - load + tau_c) / params.inertia
    return JointState(state.theta + T * vel, vel)


def base_odometry(wheel_rate: float, d: float, T: float, x_prev: float) -> float:
    if not d > 0:
        raise ValueError("wheel diameter must be positive")
    return x_prev + 0.5 * d * wheel_rate * T
