"""Kinematic description of the four arms and the active wheel.

Forward kinematics composes, per joint, a rotation about the joint axis
followed by a translation along the link offset.  Inverse kinematics is
closed-form for 2-dof chains and damped least squares for 3-dof chains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from ._ini import ConfigError, IniFile

DEFAULT_ACCEL = 200.0  # rad/s^2; Table-1 style specs carry no acceleration bound

ARM_NAMES = ("arm1", "arm2", "arm3", "arm4")


class IKError(RuntimeError):
    pass


class Unreachable(IKError):
    """Target lies outside the arm's workspace."""


class NoConvergence(IKError):
    """Iteration cap reached without meeting the residual tolerance."""


@dataclass(frozen=True)
class JointLimits:
    angle_min: float            # rad
    angle_max: float            # rad
    speed_max: float            # rad/s, symmetric unless speed_min is given
    accel_min: float = -DEFAULT_ACCEL
    accel_max: float = DEFAULT_ACCEL
    torque_max: float = math.inf
    speed_min: float | None = None

    def __post_init__(self):
        if not self.angle_min < self.angle_max:
            raise ValueError(f"angle_min {self.angle_min} must be < angle_max {self.angle_max}")
        if not self.speed_max > 0:
            raise ValueError("speed_max must be positive")
        if self.speed_min is not None and not self.speed_min < 0:
            raise ValueError("speed_min must be negative")
        if not self.accel_min < 0 < self.accel_max:
            raise ValueError("need accel_min < 0 < accel_max")
        if not self.torque_max > 0:
            raise ValueError("torque_max must be positive")

    @property
    def vel_min(self) -> float:
        return -self.speed_max if self.speed_min is None else self.speed_min

    @property
    def vel_max(self) -> float:
        return self.speed_max

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.angle_min) or math.isfinite(self.angle_max)

    def clamp(self, angle: float) -> float:
        return min(max(angle, self.angle_min), self.angle_max)


def rotation(axis: Sequence[float], angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    return rotation((0, 0, 1), yaw) @ rotation((0, 1, 0), pitch) @ rotation((1, 0, 0), roll)


@dataclass(frozen=True, eq=False)
class KinematicChain:
    name: str
    joint_axes: tuple          # unit 3-vectors, expressed in the parent link frame
    link_offsets: tuple        # 3-vectors (m), applied after each joint rotation
    base_transform: np.ndarray = field(default_factory=lambda: np.eye(4))
    joint_names: tuple = ()

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float).reshape(3) for a in self.joint_axes)
        offs = tuple(np.asarray(o, dtype=float).reshape(3) for o in self.link_offsets)
        if len(axes) != len(offs):
            raise ValueError("joint_axes and link_offsets must have equal length")
        if len(axes) not in (2, 3):
            raise ValueError("chains have 2 or 3 joints")
        for a in axes:
            if abs(np.linalg.norm(a) - 1.0) > 1e-12:
                raise ValueError(f"joint axis {a} is not unit length")
        base = np.asarray(self.base_transform, dtype=float)
        if base.shape != (4, 4):
            raise ValueError("base_transform must be 4x4")
        r = base[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9) or not np.allclose(base[3], [0, 0, 0, 1]):
            raise ValueError("base_transform must be a rigid transform")
        object.__setattr__(self, "joint_axes", axes)
        object.__setattr__(self, "link_offsets", offs)
        object.__setattr__(self, "base_transform", base)
        names = self.joint_names or tuple(f"{self.name}_{i + 1}" for i in range(len(axes)))
        object.__setattr__(self, "joint_names", tuple(names))
        # plain-float copies for the IK inner loop
        object.__setattr__(self, "_axes_f", tuple(tuple(a.tolist()) for a in axes))
        object.__setattr__(self, "_offs_f", tuple(tuple(o.tolist()) for o in offs))
        object.__setattr__(self, "_base_rows", [tuple(r) for r in base[:3, :3].tolist()])
        object.__setattr__(self, "_base_pos", tuple(base[:3, 3].tolist()))

    @property
    def dof(self) -> int:
        return len(self.joint_axes)

    @property
    def reach(self) -> float:
        return float(sum(np.linalg.norm(o) for o in self.link_offsets))

    @property
    def origin(self) -> np.ndarray:
        return self.base_transform[:3, 3].copy()


def _frames(chain: KinematicChain, angles: Sequence[float]):
    """Joint origins, world axes and the end-effector position."""
    R = chain.base_transform[:3, :3]
    p = chain.base_transform[:3, 3].copy()
    origins, axes = [], []
    for axis, off, q in zip(chain.joint_axes, chain.link_offsets, angles):
        origins.append(p)
        axes.append(R @ axis)
        R = R @ rotation(axis, q)
        p = p + R @ off
    return origins, axes, p


def forward_kinematics(chain: KinematicChain, angles: Sequence[float]) -> np.ndarray:
    """End-effector position in the torso frame."""
    if len(angles) != chain.dof:
        raise ValueError(f"{chain.name}: expected {chain.dof} angles, got {len(angles)}")
    return _frames(chain, angles)[2]


def _cross(a, b):
    # np.cross is slow for single 3-vectors
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def jacobian(chain: KinematicChain, angles: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Positional Jacobian (3 x dof) and the end-effector position."""
    origins, axes, p = _frames(chain, angles)
    J = np.array([_cross(w, p - o) for o, w in zip(origins, axes)]).T
    return J, p


def check_limits(angles: Sequence[float], limits: Sequence[JointLimits]) -> bool:
    if len(angles) != len(limits):
        raise ValueError(f"{len(angles)} angles vs {len(limits)} limit entries")
    return all(lim.angle_min <= q <= lim.angle_max for q, lim in zip(angles, limits))


def _wrap(q: float) -> float:
    return math.atan2(math.sin(q), math.cos(q))


def _ik_two_link(chain, target, seed, limits, tol):
    # Work in the base frame: p = R1(q1) (o1 + R2(q2) o2)
    R0 = chain.base_transform[:3, :3]
    p = R0.T @ (np.asarray(target, float) - chain.base_transform[:3, 3])
    a1, a2 = chain.joint_axes
    o1, o2 = chain.link_offsets
    o2_par = a2 * (a2 @ o2)
    o2_perp = o2 - o2_par
    o2_cross = np.array(_cross(a2, o2))
    # |p|^2 = |o1|^2 + |o2|^2 + 2 o1.R2(q2)o2   ->   A cos q2 + B sin q2 = C
    A = float(o1 @ o2_perp)
    B = float(o1 @ o2_cross)
    C = 0.5 * (p @ p - o1 @ o1 - o2 @ o2) - float(o1 @ o2_par)
    Rn = math.hypot(A, B)
    if Rn < 1e-12:
        raise Unreachable(f"{chain.name}: degenerate 2-link geometry")
    ratio = C / Rn
    if abs(ratio) > 1.0 + 1e-9:
        raise Unreachable(f"{chain.name}: target {np.round(target, 6)} out of reach")
    ratio = max(-1.0, min(1.0, ratio))
    base_ang = math.atan2(B, A)
    spread = math.acos(ratio)
    candidates = []
    for q2 in {_wrap(base_ang + spread), _wrap(base_ang - spread)}:
        v = o1 + o2_par + math.cos(q2) * o2_perp + math.sin(q2) * o2_cross
        vp = v - a1 * (a1 @ v)
        pp = p - a1 * (a1 @ p)
        if np.linalg.norm(vp) < 1e-12 or np.linalg.norm(pp) < 1e-12:
            q1 = seed[0]
        else:
            q1 = math.atan2(float(a1 @ np.array(_cross(vp, pp))), float(vp @ pp))
        q = [_wrap(q1), q2]
        # angles equivalent modulo 2*pi may still fit the limits
        for i in range(2):
            lim = limits[i]
            for shift in (0.0, 2 * math.pi, -2 * math.pi):
                if lim.angle_min <= q[i] + shift <= lim.angle_max:
                    q[i] += shift
                    break
        if not check_limits(q, limits):
            continue
        res = np.linalg.norm(forward_kinematics(chain, q) - target)
        if res <= tol:
            candidates.append((abs(q[0] - seed[0]) + abs(q[1] - seed[1]), q))
    if not candidates:
        raise Unreachable(f"{chain.name}: no in-limit solution for target {np.round(target, 6)}")
    return np.array(min(candidates, key=lambda c: c[0])[1])


MAX_IK_STEP = 0.3  # rad; keeps the first steps from a singular seed sane
POLISH_BELOW = 1e-5  # m
STALL_WINDOW = 15


def _frames_fast(chain, q):
    """Plain-float Jacobian columns and end-effector position; numpy call
    overhead dominates for 3-vectors and this runs a few times per IK solve."""
    R = chain._base_rows
    px, py, pz = chain._base_pos
    origins, axes = [], []
    for (x, y, z), (ox, oy, oz), a in zip(chain._axes_f, chain._offs_f, q):
        origins.append((px, py, pz))
        axes.append((R[0][0] * x + R[0][1] * y + R[0][2] * z,
                     R[1][0] * x + R[1][1] * y + R[1][2] * z,
                     R[2][0] * x + R[2][1] * y + R[2][2] * z))
        c, sn = math.cos(a), math.sin(a)
        C = 1.0 - c
        r0 = (c + x * x * C, x * y * C - z * sn, x * z * C + y * sn)
        r1 = (y * x * C + z * sn, c + y * y * C, y * z * C - x * sn)
        r2 = (z * x * C - y * sn, z * y * C + x * sn, c + z * z * C)
        R = [(row[0] * r0[0] + row[1] * r1[0] + row[2] * r2[0],
              row[0] * r0[1] + row[1] * r1[1] + row[2] * r2[1],
              row[0] * r0[2] + row[1] * r1[2] + row[2] * r2[2]) for row in R]
        px += R[0][0] * ox + R[0][1] * oy + R[0][2] * oz
        py += R[1][0] * ox + R[1][1] * oy + R[1][2] * oz
        pz += R[2][0] * ox + R[2][1] * oy + R[2][2] * oz
    p = (px, py, pz)
    cols = [_cross(w, (px - o[0], py - o[1], pz - o[2])) for o, w in zip(origins, axes)]
    return cols, p


def _det3(a, b, c):
    # determinant of the matrix with columns a, b, c
    return (a[0] * (b[1] * c[2] - b[2] * c[1]) - b[0] * (a[1] * c[2] - a[2] * c[1])
            + c[0] * (a[1] * b[2] - a[2] * b[1]))


def _solve_cols(cols, rhs):
    """Cramer's rule for the 3x3 system with the given columns."""
    d = _det3(*cols)
    a, b, c = cols
    return d, (_det3(rhs, b, c) / d, _det3(a, rhs, c) / d, _det3(a, b, rhs) / d)


def _step_fast(cols, err, err_norm, lam2):
    """Unpinned step for a 3-joint chain, or None when the numpy path is needed."""
    if err_norm < POLISH_BELOW:
        if abs(_det3(*cols)) <= 1e-6:
            return None
        return list(_solve_cols(cols, err)[1])
    # (J J^T + lam2 I) y = err, dq = J^T y
    rows = [[sum(cols[k][i] * cols[k][j] for k in range(3)) + (lam2 if i == j else 0.0)
             for j in range(3)] for i in range(3)]
    d, y = _solve_cols([tuple(r[c] for r in rows) for c in range(3)], err)
    if d == 0.0:
        return None
    return [col[0] * y[0] + col[1] * y[1] + col[2] * y[2] for col in cols]


def _step_pinned(J, err, err_norm, q, lo, hi, lam2):
    """Step with joints that sit on a limit and push outward frozen."""
    free = np.ones(len(q), dtype=bool)
    for _pass in range(len(q)):
        Jf = J * free
        if err_norm < POLISH_BELOW:
            # undamped Gauss-Newton finish; damping only slows the last digits
            dq = np.linalg.lstsq(Jf, err, rcond=1e-10)[0]
        else:
            dq = Jf.T @ np.linalg.solve(Jf @ Jf.T + lam2 * np.eye(3), err)
        pinned = free & (((q <= lo) & (dq < 0)) | ((q >= hi) & (dq > 0)))
        if not pinned.any():
            break
        free &= ~pinned
    return dq


def _dls(chain, target, q, lo, hi, damping, max_iter, tol):
    lam2 = damping * damping
    err_norm = math.inf
    history = []
    q = [float(v) for v in q]
    lo_l, hi_l = lo.tolist(), hi.tolist()
    n = len(q)
    for it in range(max_iter):
        cols, p = _frames_fast(chain, q)
        err = (target[0] - p[0], target[1] - p[1], target[2] - p[2])
        err_norm = math.hypot(*err)
        if err_norm <= tol * 1e-3:
            break
        history.append(err_norm)
        if it >= STALL_WINDOW and err_norm > tol and err_norm > 0.99 * history[-STALL_WINDOW]:
            break  # stuck against a limit or in a local minimum; let the caller restart
        dq = _step_fast(cols, err, err_norm, lam2) if n == 3 else None
        if dq is None or any((q[i] <= lo_l[i] and dq[i] < 0) or (q[i] >= hi_l[i] and dq[i] > 0)
                             for i in range(n)):
            dq = _step_pinned(np.array(cols).T, np.array(err), err_norm, np.array(q), lo, hi, lam2).tolist()
        big = max(abs(v) for v in dq)
        if big > MAX_IK_STEP:
            dq = [v * MAX_IK_STEP / big for v in dq]
        q = [min(max(q[i] + dq[i], lo_l[i]), hi_l[i]) for i in range(n)]
    else:
        err_norm = float(np.linalg.norm(target - forward_kinematics(chain, q)))
    return np.array(q), err_norm


def inverse_kinematics(chain: KinematicChain, target: Sequence[float], seed: Sequence[float],
                       limits: Sequence[JointLimits], *, tol: float = 1e-8,
                       max_iter: int = 200, damping: float = 1e-3) -> np.ndarray:
    """Joint angles placing the end effector at ``target``.

    Raises Unreachable for targets beyond the chain's reach and
    NoConvergence when damped least squares (from the seed, then from a
    few fixed restart points) cannot get the residual under ``tol``.
    The result always lies inside the joint limits.
    """
    if len(seed) != chain.dof or len(limits) != chain.dof:
        raise ValueError(f"{chain.name}: seed/limits must have {chain.dof} entries")
    target = np.asarray(target, dtype=float).reshape(3)
    if np.linalg.norm(target - chain.origin) > chain.reach + 1e-9:
        raise Unreachable(f"{chain.name}: target {np.round(target, 6)} beyond reach {chain.reach:.4f} m")
    if chain.dof == 2:
        return _ik_two_link(chain, target, seed, limits, tol)

    lo = np.array([l.angle_min for l in limits])
    hi = np.array([l.angle_max for l in limits])
    q0 = np.clip(np.asarray(seed, dtype=float), lo, hi)
    best = None
    for start in _restarts(q0, lo, hi):
        q, res = _dls(chain, target, start, lo, hi, damping, max_iter, tol)
        if res <= tol:
            return q
        if best is None or res < best:
            best = res
    raise NoConvergence(f"{chain.name}: residual {best:.3e} m after {max_iter} iterations "
                        f"for target {np.round(target, 6)}")


def _restarts(q0, lo, hi):
    """The seed first, then a fixed grid over the joint box (deterministic)."""
    yield q0
    fracs = (0.5, 0.2, 0.8, 0.05, 0.95)
    for f1 in fracs:
        for f2 in fracs:
            for f3 in fracs:
                yield lo + np.array((f1, f2, f3)) * (hi - lo)


@dataclass
class RobotModel:
    arms: dict[str, KinematicChain]
    limits: dict[str, JointLimits]           # keyed by joint name, wheel included
    wheel_diameter: float
    passive_wheel_baseline: float = 0.3
    wheel_joint: str = "wheel"

    def __post_init__(self):
        if not self.wheel_diameter > 0:
            raise ValueError("wheel diameter must be positive")
        dofs = [self.arms[a].dof for a in ARM_NAMES]
        if dofs != [3, 3, 3, 2]:
            raise ValueError(f"expected arm dofs (3, 3, 3, 2), got {tuple(dofs)}")
        for name in self.joint_names:
            if name not in self.limits:
                raise ValueError(f"no limits for joint {name}")

    @property
    def arm_joint_names(self) -> list[str]:
        return [n for a in ARM_NAMES for n in self.arms[a].joint_names]

    @property
    def joint_names(self) -> list[str]:
        return self.arm_joint_names + [self.wheel_joint]

    def arm_limits(self, arm: str) -> list[JointLimits]:
        return [self.limits[n] for n in self.arms[arm].joint_names]

    def with_limits(self, **overrides: JointLimits) -> "RobotModel":
        limits = dict(self.limits)
        limits.update(overrides)
        return RobotModel(dict(self.arms), limits, self.wheel_diameter,
                          self.passive_wheel_baseline, self.wheel_joint)


# -- robot description file ------------------------------------------------

_ARM_KEYS = {"base_position", "base_rpy", "joints", "axis1", "axis2", "axis3",
             "offset1", "offset2", "offset3", "angle_min", "angle_max",
             "speed_max", "accel_min", "accel_max", "torque_max"}
_WHEEL_KEYS = {"joint", "diameter", "passive_wheel_baseline", "speed_max",
               "accel_min", "accel_max", "torque_max"}


def default_robot_path() -> Path:
    return Path(str(resources.files("quadarm") / "data" / "default_robot.ini"))


def load_robot(path: str | Path | None = None) -> RobotModel:
    """Load a robot description file (angles in degrees, lengths in metres)."""
    ini = IniFile(path or default_robot_path())
    ini.check_unknown({**{a: _ARM_KEYS for a in ARM_NAMES}, "wheel": _WHEEL_KEYS})
    arms, limits = {}, {}
    for arm in ARM_NAMES:
        if not ini.has(arm):
            raise ConfigError(f"{ini.path}: missing section [{arm}]")
        names = ini.get_str(arm, "joints").split()
        n = len(names)
        if n not in (2, 3):
            raise ini.error(arm, "joints", "an arm has 2 or 3 joints")
        axes, offsets = [], []
        for i in range(1, n + 1):
            ax = np.array(ini.get_floats(arm, f"axis{i}", 3))
            norm = np.linalg.norm(ax)
            if norm == 0:
                raise ini.error(arm, f"axis{i}", "zero axis")
            axes.append(ax / norm)
            offsets.append(ini.get_floats(arm, f"offset{i}", 3))
        base = np.eye(4)
        base[:3, 3] = ini.get_floats(arm, "base_position", 3, default=[0, 0, 0])
        rpy = np.radians(ini.get_floats(arm, "base_rpy", 3, default=[0, 0, 0]))
        base[:3, :3] = rpy_matrix(*rpy)
        try:
            arms[arm] = KinematicChain(arm, tuple(axes), tuple(offsets), base, tuple(names))
        except ValueError as exc:
            raise ini.error(arm, None, str(exc)) from None
        amin = ini.get_floats(arm, "angle_min", n)
        amax = ini.get_floats(arm, "angle_max", n)
        vmax = ini.get_floats(arm, "speed_max", n)
        tmax = ini.get_floats(arm, "torque_max", n)
        accmax = ini.get_floats(arm, "accel_max", n, default=[DEFAULT_ACCEL] * n)
        accmin = ini.get_floats(arm, "accel_min", n, default=[-a for a in accmax])
        for i, name in enumerate(names):
            try:
                limits[name] = JointLimits(math.radians(amin[i]), math.radians(amax[i]), vmax[i],
                                           accmin[i], accmax[i], tmax[i])
            except ValueError as exc:
                raise ini.error(arm, None, f"joint {name}: {exc}") from None
    if not ini.has("wheel"):
        raise ConfigError(f"{ini.path}: missing section [wheel]")
    wheel = ini.get_str("wheel", "joint", "wheel")
    try:
        limits[wheel] = JointLimits(
            -math.inf, math.inf, ini.get_float("wheel", "speed_max"),
            ini.get_float("wheel", "accel_min", -ini.get_float("wheel", "accel_max", DEFAULT_ACCEL)),
            ini.get_float("wheel", "accel_max", DEFAULT_ACCEL),
            ini.get_float("wheel", "torque_max"))
        return RobotModel(arms, limits, ini.get_float("wheel", "diameter"),
                          ini.get_float("wheel", "passive_wheel_baseline", 0.3), wheel)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ini.error("wheel", None, str(exc)) from None
