"""Online per-joint trajectory modification.

Stage one turns the (two-sample delayed) raw command into a reference that
respects velocity and acceleration bounds by solving a three-step
receding-horizon QP.  Stage two looks ahead over the braking horizon and,
if stopping would carry the reference past an angle limit, replaces the
sample with a saturated deceleration toward zero velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .qp import ActiveSetQP, QPInfeasible, QPSolution
from .robot_model import JointLimits

# Coefficients of each constrained quantity in (e_k, e_k+1, e_k+2).
# Rows 0-2: backward-difference velocity at h = 0, 1, 2; rows 3-5: acceleration.
QP_ROWS = (
    (1.0, 0.0, 0.0),
    (-1.0, 1.0, 0.0),
    (0.0, -1.0, 1.0),
    (1.0, 0.0, 0.0),
    (-2.0, 1.0, 0.0),
    (1.0, -2.0, 1.0),
)


def sat(x: float, lo: float, hi: float) -> float:
    """sat_(lo, hi)(x)."""
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


@dataclass
class FilterState:
    limits: JointLimits
    T: float
    w1: float = 1.0
    w2: float = 1.0
    ref_prev1: float = 0.0      # theta_ref at k-1
    ref_prev2: float = 0.0      # theta_ref at k-2
    cmd_buffer: list = field(default_factory=list)   # [cmd_k-2, cmd_k-1, cmd_k]
    e_prev: float = 0.0
    samples: int = 0
    infeasible: int = 0         # count of samples that used the fallback law
    guarded: int = 0            # count of samples replaced by the angle guard
    last_solution: QPSolution | None = None

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("sampling time must be positive")
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("weights must be non-negative")
        self._qp = ActiveSetQP(QP_ROWS, self.w1, self.w2)

    @property
    def ref_velocity(self) -> float:
        return (self.ref_prev1 - self.ref_prev2) / self.T


# Bounds are tightened by a few ulps of the angle magnitude so that rounding
# in phi = cmd + e can never push a difference quotient past the true bound.
VEL_MARGIN_ULPS = 8
ACC_MARGIN_ULPS = 16


def _ulp(state: FilterState) -> float:
    c0, c1, c2 = state.cmd_buffer
    return math.ulp(max(abs(c0), abs(c1), abs(c2), abs(state.ref_prev1), abs(state.ref_prev2), 1.0))


def qp_problem(state: FilterState, margin: bool = True):
    """Constraint rows in e-space: (rows, lo, hi) for ``lo <= row . e <= hi``."""
    T = state.T
    lim = state.limits
    c0, c1, c2 = state.cmd_buffer
    p1, p2 = state.ref_prev1, state.ref_prev2
    u = _ulp(state) if margin else 0.0
    vlo, vhi = lim.vel_min * T + VEL_MARGIN_ULPS * u, lim.vel_max * T - VEL_MARGIN_ULPS * u
    alo, ahi = lim.accel_min * T * T + ACC_MARGIN_ULPS * u, lim.accel_max * T * T - ACC_MARGIN_ULPS * u
    # constant part of each row once phi_h = c_h + e_h is substituted
    const = (c0 - p1, c1 - c0, c2 - c1, c0 - 2.0 * p1 + p2, c1 - 2.0 * c0 + p1, c2 - 2.0 * c1 + c0)
    lo = [vlo - const[0], vlo - const[1], vlo - const[2],
          alo - const[3], alo - const[4], alo - const[5]]
    hi = [vhi - const[0], vhi - const[1], vhi - const[2],
          ahi - const[3], ahi - const[4], ahi - const[5]]
    return QP_ROWS, lo, hi


def _feasible_start(state: FilterState):
    # hold the history velocity (clipped) with zero acceleration
    lim = state.limits
    p1 = state.ref_prev1
    u = VEL_MARGIN_ULPS * _ulp(state)
    step = sat(state.ref_prev1 - state.ref_prev2, lim.vel_min * state.T + u, lim.vel_max * state.T - u)
    c = state.cmd_buffer
    return [p1 + step - c[0], p1 + 2.0 * step - c[1], p1 + 3.0 * step - c[2]]


def qp_modify(state: FilterState) -> float:
    """phi_ref_k = cmd_k-2 + e_k, with e from the receding-horizon QP."""
    rows, lo, hi = qp_problem(state)
    c0 = state.cmd_buffer[0]
    # Fast path: the unmodified command already satisfies every bound.
    if all(l <= 0.0 <= h for l, h in zip(lo, hi)):
        state.last_solution = QPSolution((0.0, 0.0, 0.0), (), (), 0)
        state.e_prev = 0.0
        return c0
    qp = state._qp
    sol = qp.solve(qp.bounds(lo, hi), _feasible_start(state), tol=2.0 * _ulp(state))
    state.last_solution = sol
    state.e_prev = sol.e[0]
    return c0 + sol.e[0]


def _accel_pair(vel: float, lim: JointLimits) -> tuple[float, float]:
    """(first-sample acceleration, subsequent braking acceleration) by sign of vel."""
    if vel > 0.0:
        return lim.accel_max, lim.accel_min
    if vel < 0.0:
        return lim.accel_min, lim.accel_max
    return 0.0, 0.0


def deceleration_horizon(vel: float, limits: JointLimits, T: float) -> int:
    """Smallest l >= 0 with vel*(vel + T*a_first + (l-1)*T*a_brake) <= 0."""
    if not T > 0:
        raise ValueError("T must be positive")
    if vel == 0.0:
        return 0
    a_first, a_brake = _accel_pair(vel, limits)

    def reversed_at(l: int) -> bool:
        return vel * (vel + T * (a_first + (l - 1) * a_brake)) <= 0.0

    guess = math.ceil((vel + T * a_first) / (-T * a_brake)) + 1
    l = max(guess, 0)
    while l > 0 and reversed_at(l - 1):
        l -= 1
    while not reversed_at(l):
        l += 1
        assert l < 10**9, "deceleration horizon diverged"
    return l


def predict_peak(phi: float, vel: float, L: int, limits: JointLimits, T: float) -> float:
    """Angle after one full-acceleration sample followed by L-1 braking samples,
    propagated through the double integrator x <- A x + B u."""
    if L < 0:
        raise ValueError("L must be non-negative")
    if L == 0:
        return phi
    a_first, a_brake = _accel_pair(vel, limits)
    # C A^L Phi + C A^(L-1) B a_first + C sum_{i<L-1} A^i B a_brake, with C A^n B = n T^2
    return (phi + L * T * vel + (L - 1) * T * T * a_first
            + T * T * a_brake * (L - 1) * (L - 2) / 2.0)


def braking_reference(state: FilterState) -> float:
    """Decelerate toward zero velocity with saturated acceleration."""
    lim = state.limits
    T = state.T
    m = ACC_MARGIN_ULPS * _ulp(state) / (T * T)
    acc = sat(-(state.ref_prev1 - state.ref_prev2) / (T * T), lim.accel_min + m, lim.accel_max - m)
    return state.ref_prev1 + T * state.ref_velocity + T * T * acc


def angle_guard(state: FilterState, phi: float, vel: float) -> float:
    lim = state.limits
    if not lim.bounded:
        return phi
    L = deceleration_horizon(vel, lim, state.T)
    peak = predict_peak(phi, vel, L, lim, state.T)
    if lim.angle_min <= peak <= lim.angle_max:
        return phi
    state.guarded += 1
    return braking_reference(state)


def filter_step(state: FilterState, cmd: float) -> float:
    """Consume one raw command sample and emit the constrained reference."""
    if state.samples == 0:
        start = state.limits.clamp(cmd)
        state.cmd_buffer = [cmd, cmd, cmd]
        state.ref_prev1 = state.ref_prev2 = start
        state.samples = 1
        return start
    state.cmd_buffer = [state.cmd_buffer[1], state.cmd_buffer[2], cmd]
    state.samples += 1
    if state.samples == 2:
        return state.ref_prev1
    try:
        phi = qp_modify(state)
    except QPInfeasible:
        state.infeasible += 1
        ref = braking_reference(state)
    else:
        ref = angle_guard(state, phi, (phi - state.ref_prev1) / state.T)
    state.ref_prev2 = state.ref_prev1
    state.ref_prev1 = ref
    return ref


def new_filter(limits: JointLimits, T: float, w1: float = 1.0, w2: float = 1.0) -> FilterState:
    return FilterState(limits=limits, T=T, w1=w1, w2=w2)
