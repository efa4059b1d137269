"""Proxy-based sliding-mode angle controller, one instance per joint.

A virtual proxy at angle ``p`` is coupled to the measured joint angle by a
PID-like element and pulled toward the reference by a sliding-mode element
whose output is confined to [-F, F].  Both relations are discretized with
backward differences, which makes the torque an affine function of the new
proxy position on one side and a set-valued sign of an affine function of it
on the other.  Their intersection is unique and found in closed form, so the
output never chatters and never exceeds F.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PsmcGains:
    M: float        # proxy inertia
    B: float        # derivative-like gain
    K: float        # proportional-like gain
    L: float        # integral-like gain
    J: float        # sliding surface, s^2
    H: float        # sliding surface, s
    F: float        # torque limit

    def __post_init__(self):
        for name in ("M", "B", "K", "L", "J", "H", "F"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"PSMC gain {name} must be positive and finite, got {v}")

    def check_torque(self, torque_max: float):
        if self.F > torque_max:
            raise ValueError(f"torque limit F={self.F} exceeds actuator limit {torque_max}")


@dataclass
class PsmcState:
    p: float = 0.0          # proxy angle
    p_dot: float = 0.0      # proxy velocity
    a: float = 0.0          # alpha, with alpha' = theta - p
    a_dot: float = 0.0      # theta - p at the previous sample
    beta: float = 0.0       # p - theta_ref
    beta_dot: float = 0.0
    tau_prev: float = 0.0
    primed: bool = False    # beta history taken from the first reference seen


def default_gains(inertia: float, F: float, bandwidth_hz: float = 20.0,
                  recovery_time: float = 0.05, M: float | None = None) -> PsmcGains:
    """Gains for a joint of the given inertia.

    With ``M`` equal to the joint inertia the proxy-to-joint error obeys
    I e''' + B e'' + K e' + L e = 0 while unsaturated; B, K and L place a
    triple pole at the bandwidth.  The sliding surface J b'' + H b' + b = 0 is
    critically damped with time constant ``recovery_time``.
    """
    w = 2.0 * math.pi * bandwidth_hz
    lam = recovery_time
    return PsmcGains(M=inertia if M is None else M, B=3.0 * inertia * w,
                     K=3.0 * inertia * w * w, L=inertia * w ** 3,
                     J=lam * lam, H=2.0 * lam, F=F)


def reset(gains: PsmcGains, theta0: float) -> PsmcState:
    """Proxy at the measured angle, at rest, with empty integrator."""
    return PsmcState(p=float(theta0))


def psmc_step(g: PsmcGains, s: PsmcState, ref: float, theta: float, T: float) -> float:
    """Advance one sample and return the torque, |tau| <= F."""
    if not s.primed:
        # treat the first reference as having been steady; otherwise the
        # second difference of beta reads an offset as a jump and kicks back
        s.beta, s.beta_dot, s.primed = s.p - ref, 0.0, True
    M, B, K, L = g.M, g.B, g.K, g.L
    # PID side: tau = a_p * p + b0, p being the new proxy angle
    a_p = M / (T * T) + B / T + K + L * T
    b0 = (-M * (s.p + T * s.p_dot) / (T * T) - B * (theta - s.a_dot) / T
          - K * theta - L * (s.a + T * theta))
    # sliding side: tau in sgn_F(s0 - c * p)
    c = g.J / (T * T) + g.H / T + 1.0
    s1 = g.J * (s.beta + T * s.beta_dot) / (T * T) + g.H * s.beta / T
    s0 = c * ref + s1
    tau = b0 + a_p * s0 / c
    if tau > g.F:
        tau = g.F
    elif tau < -g.F:
        tau = -g.F
    p = (tau - b0) / a_p
    s.p_dot = (p - s.p) / T
    s.p = p
    s.a_dot = theta - p
    s.a += T * s.a_dot
    beta = p - ref
    s.beta_dot = (beta - s.beta) / T
    s.beta = beta
    s.tau_prev = tau
    return tau
