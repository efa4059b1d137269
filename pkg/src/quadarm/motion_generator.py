"""Cartesian arm commands and the wheel rate command for each locomotion mode.

Mode poses are stored as joint configurations and converted to end-effector
positions through forward kinematics of the loaded robot, so every keyframe is
reachable by construction.  Mode switches morph between poses with quintic
time scaling.  While walking, arms 2 and 3 follow an alternating swing/stance
pattern on top of their mode pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .robot_model import ARM_NAMES, RobotModel, forward_kinematics

MODES = ("walking", "driving", "driving_grasp", "standing")
ACTIONS = ("pick",)

# Joint-space poses (rad) per mode, arm order as ARM_NAMES.
MODE_JOINTS = {
    "walking": {"arm1": (0.0, -0.6, 1.2), "arm2": (0.0, -0.6, 1.2),
                "arm3": (0.0, -0.6, 1.2), "arm4": (-1.0, 1.9)},
    "driving": {"arm1": (0.0, -0.6, 1.2), "arm2": (0.0, -1.4, 2.0),
                "arm3": (0.0, -1.4, 2.0), "arm4": (-1.0, 1.9)},
    "driving_grasp": {"arm1": (0.0, -0.6, 1.2), "arm2": (0.0, -1.4, 2.0),
                      "arm3": (0.0, -1.4, 2.0), "arm4": (0.6, 0.5)},
    "standing": {"arm1": (0.0, -0.3, 0.6), "arm2": (0.0, -0.3, 0.6),
                 "arm3": (0.0, -0.3, 0.6), "arm4": (-1.0, 1.9)},
}
PICK_REACH = {"arm4": (0.8, 0.2)}

# Transition durations (s) keyed by (from, to).
TRANSITION_TIME = {
    ("walking", "driving"): 5.0,
    ("driving", "driving_grasp"): 10.0,
    ("walking", "standing"): 8.0,
    ("standing", "walking"): 4.0,
}
DEFAULT_TRANSITION = 5.0
PICK_TIME = 10.0
MOVING_MODES = ("walking", "driving", "driving_grasp")


def quintic(s: float) -> float:
    """Time scaling with zero end velocity and acceleration, s clipped to [0, 1]."""
    if s <= 0.0:
        return 0.0
    if s >= 1.0:
        return 1.0
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


@dataclass
class KeyframeSequence:
    times: tuple[float, ...]
    targets: list[dict[str, np.ndarray]]

    def __post_init__(self):
        if not self.times or len(self.times) != len(self.targets):
            raise ValueError("need one target set per keyframe time")
        if self.times[0] != 0.0:
            raise ValueError("first keyframe must be at t = 0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("keyframe times must be strictly increasing")

    @property
    def duration(self) -> float:
        return self.times[-1]

    def at(self, t: float) -> dict[str, np.ndarray]:
        times = self.times
        if t <= 0.0 or len(times) == 1:
            return {a: v.copy() for a, v in self.targets[0].items()}
        if t >= times[-1]:
            return {a: v.copy() for a, v in self.targets[-1].items()}
        i = next(j for j in range(1, len(times)) if t < times[j])
        s = quintic((t - times[i - 1]) / (times[i] - times[i - 1]))
        p0, p1 = self.targets[i - 1], self.targets[i]
        return {a: p0[a] + s * (p1[a] - p0[a]) for a in p0}


def mode_pose(model: RobotModel, mode: str, bag: bool = False) -> dict[str, np.ndarray]:
    if mode not in MODE_JOINTS:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    joints = dict(MODE_JOINTS[mode])
    if bag:
        joints.update(PICK_REACH)
    return {a: forward_kinematics(model.arms[a], joints[a]) for a in ARM_NAMES}


def mode_keyframes(mode: str, model: RobotModel, current: str | None = None,
                   duration: float | None = None) -> KeyframeSequence:
    """Keyframes morphing from ``current`` into ``mode``.

    ``mode`` may also be ``"pick"``: reach down with arm 4 from the standing
    pose and come back, half the duration each way.
    """
    if mode == "pick":
        dur = PICK_TIME if duration is None else duration
        stand = mode_pose(model, "standing")
        return KeyframeSequence((0.0, dur / 2, dur),
                                [stand, mode_pose(model, "standing", bag=True), stand])
    target = mode_pose(model, mode)
    if current is None or current == mode:
        return KeyframeSequence((0.0,), [target])
    dur = TRANSITION_TIME.get((current, mode), DEFAULT_TRANSITION) if duration is None else duration
    if not dur > 0:
        raise ValueError("transition duration must be positive")
    return KeyframeSequence((0.0, dur), [mode_pose(model, current), target])


# -- walking gait --------------------------------------------------------

VelocityLike = float | Callable[[float], float]


@dataclass
class GaitParams:
    v: VelocityLike = 0.0
    f_w: float = 0.5
    h: float = 0.03
    stance_pos: Sequence = field(default_factory=lambda: np.zeros(3))
    v_cap: float = math.inf

    def __post_init__(self):
        if not self.f_w > 0:
            raise ValueError("walking frequency must be positive")
        if not self.h > 0:
            raise ValueError("swing height must be positive")
        if not callable(self.v) and abs(self.v) > self.v_cap:
            raise ValueError(f"|v| = {abs(self.v)} exceeds the cap {self.v_cap}")

    def velocity(self, t: float) -> float:
        v = self.v(t) if callable(self.v) else self.v
        if abs(v) > self.v_cap:
            raise ValueError(f"|v| = {abs(v)} exceeds the cap {self.v_cap} at t = {t}")
        return float(v)

    def stance(self) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(self.stance_pos, dtype=float)
        if s.shape == (3,):
            return s.copy(), s.copy()
        return s[0].copy(), s[1].copy()


def gait_phase(t: float, f_w: float) -> tuple[float, float, int]:
    """(T_s, delta, support arm).  Arm 2 supports in the first half-cycle."""
    if t < 0:
        raise ValueError("t must be non-negative")
    T_s = 1.0 / (2.0 * f_w)
    delta = math.fmod(t, 2.0 * T_s)
    return T_s, delta, 2 if delta < T_s else 3


def gait_foot_targets(gait: GaitParams, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Foot targets of arms 2 and 3 in the torso frame.

    Within one cycle arm 3 swings forward by T_s*v while arm 2 pushes back,
    then arm 2 swings forward to catch up while arm 3 pushes back.  v is the
    value latched at the start of the cycle.
    """
    T_s, delta, support = gait_phase(t, gait.f_w)
    v0 = gait.velocity(t - delta)
    stride = T_s * v0
    p2, p3 = gait.stance()
    if support == 2:
        tau = delta
        swing_x = 0.5 * stride * (1.0 - math.cos(math.pi * tau / T_s))
        p3[0] += swing_x
        p2[0] -= v0 * tau
        swing = p3
    else:
        tau = delta - T_s
        swing_x = 0.5 * stride * (1.0 - math.cos(math.pi * tau / T_s))
        p2[0] += -stride + swing_x
        p3[0] += stride - v0 * tau
        swing = p2
    if v0 != 0.0:
        swing[2] += gait.h * math.sin(math.pi * tau / T_s)
    return p2, p3


def wheel_velocity_command(v: float, d: float) -> float:
    if not d > 0:
        raise ValueError("wheel diameter must be positive")
    return 2.0 * v / d


# -- scripted mode sequence ---------------------------------------------

@dataclass
class _Segment:
    start: float
    mode: str                    # pose the segment ends in
    keys: KeyframeSequence


class MotionGenerator:
    """Arm targets and wheel rate for a timed list of mode switches."""

    def __init__(self, model: RobotModel, gait: GaitParams, initial: str = "walking",
                 switches: Sequence[tuple[float, str]] = ()):
        self.model = model
        self.gait = gait
        if initial not in MODES:
            raise ValueError(f"unknown initial mode {initial!r}")
        self.segments = [_Segment(0.0, initial, mode_keyframes(initial, model))]
        mode = initial
        for t, req in sorted(switches, key=lambda s: s[0]):
            if req not in MODES and req not in ACTIONS:
                raise ValueError(f"unknown mode {req!r} at t = {t}")
            if req == "pick" and mode != "standing":
                raise ValueError(f"pick at t = {t} requires standing mode, not {mode}")
            seg = _Segment(t, mode if req == "pick" else req, mode_keyframes(req, model, mode))
            prev = self.segments[-1]
            if t < prev.start + prev.keys.duration:
                raise ValueError(f"switch at t = {t} overlaps the motion started at t = {prev.start}")
            self.segments.append(seg)
            mode = seg.mode

    def _segment(self, t: float) -> _Segment:
        seg = self.segments[0]
        for s in self.segments[1:]:
            if s.start <= t:
                seg = s
        return seg

    def mode_at(self, t: float) -> tuple[str, bool]:
        """(mode, settled) where settled means no keyframe motion in progress."""
        seg = self._segment(t)
        return seg.mode, t >= seg.start + seg.keys.duration

    def command(self, t: float) -> tuple[dict[str, np.ndarray], float]:
        """Per-arm Cartesian targets and the wheel rate reference at time t."""
        seg = self._segment(t)
        targets = seg.keys.at(t - seg.start)
        settled_at = seg.start + seg.keys.duration
        rate = 0.0
        if seg.mode in MOVING_MODES and t >= settled_at:
            if seg.mode == "walking":
                local = t - settled_at
                stance = np.stack([targets["arm2"], targets["arm3"]])
                g = GaitParams(lambda s: self.gait.velocity(s + settled_at), self.gait.f_w,
                               self.gait.h, stance, self.gait.v_cap)
                targets["arm2"], targets["arm3"] = gait_foot_targets(g, local)
                T_s, delta, _ = gait_phase(local, self.gait.f_w)
                v = self.gait.velocity(t - delta)
            else:
                v = self.gait.velocity(t)
            rate = wheel_velocity_command(v, self.model.wheel_diameter)
        return targets, rate
