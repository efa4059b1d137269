"""Multi-rate scenario runner.

Every slow sample (T_g) the generator produces arm targets, IK turns them
into joint commands and each joint's filter emits a reference.  Every fast
tick (T_c) each joint's controller and plant advance one step.  Between slow
samples the controller sees the reference linearly interpolated from the
previous slow sample to the current one.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audit import Violation, audit_reference
from .config import ScenarioConfig, check_rates
from .motion_generator import MODE_JOINTS, GaitParams, MotionGenerator
from .plant import JointState, base_odometry, joint_step
from .psmc import psmc_step, reset
from .robot_model import ARM_NAMES, IKError, JointLimits, inverse_kinematics
from .trajectory_filter import filter_step, new_filter

CSV_FORMAT = "%.9e"

# Default mode scripts per task: (initial mode, [(time, mode), ...]).
TASK_SEQUENCES = {
    "walking": ("walking", []),
    "driving": ("walking", [(0.0, "driving")]),
    "driving_grasp": ("driving", [(0.0, "driving_grasp")]),
    "carry_bag": ("walking", [(0.0, "standing"), (8.0, "pick"), (18.0, "walking")]),
    "fig5_validation": ("standing", []),
}

FIG5_JOINT = "j32"


def fig5_command(t: float) -> float:
    """Scripted raw command for the single-joint validation run."""
    if t < 1.0:
        return 0.0
    if t < 5.0:
        return -2.2     # beyond the angle floor
    if t < 6.0:
        return 0.0
    if t < 12.0:
        return -1.6     # pressed against the ground until the contact window closes
    if t < 15.0:
        return 0.0
    return -0.5 + 0.5 * math.sin(2.0 * math.pi * 0.5 * (t - 15.0))


class ScenarioError(RuntimeError):
    pass


@dataclass
class ScenarioLog:
    joints: list[str]
    T: float
    t: np.ndarray
    cmd: np.ndarray          # (samples, joints)
    ref: np.ndarray
    meas: np.ndarray
    tau: np.ndarray
    wheel_rate_ref: np.ndarray
    wheel_rate: np.ndarray
    base_x: np.ndarray
    max_abs_tau: dict[str, float] = field(default_factory=dict)   # over every fast tick
    infeasible: dict[str, int] = field(default_factory=dict)
    resolution: float | None = None    # absolute rounding of stored values, if re-read

    def __len__(self):
        return len(self.t)

    def column(self, joint: str, kind: str) -> np.ndarray:
        return getattr(self, kind)[:, self.joints.index(joint)]

    def header(self) -> list[str]:
        cols = ["t"]
        for j in self.joints:
            cols += [f"{j}_cmd", f"{j}_ref", f"{j}_meas", f"{j}_tau"]
        return cols + ["wheel_rate_ref", "wheel_rate", "base_x"]

    def table(self) -> np.ndarray:
        n, m = len(self.t), len(self.joints)
        block = np.stack([self.cmd, self.ref, self.meas, self.tau], axis=2).reshape(n, 4 * m)
        return np.column_stack([self.t, block, self.wheel_rate_ref, self.wheel_rate, self.base_x])

    def write_csv(self, path: str | Path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(self.header()) + "\n")
            if len(self.t):
                np.savetxt(fh, self.table(), fmt=CSV_FORMAT, delimiter=",")

    @classmethod
    def read_csv(cls, path: str | Path, T: float | None = None) -> "ScenarioLog":
        with open(path, encoding="utf-8", newline="") as fh:
            header = next(csv.reader(fh))
        if header[0] != "t" or header[-3:] != ["wheel_rate_ref", "wheel_rate", "base_x"] \
                or (len(header) - 4) % 4:
            raise ValueError(f"{path}: not a scenario log header")
        joints = [h[:-4] for h in header[1:-3:4]]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)     # header-only log
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.size == 0:
            data = np.zeros((0, len(header)))
        if data.shape[1] != len(header):
            raise ValueError(f"{path}: {data.shape[1]} columns, header has {len(header)}")
        m = len(joints)
        block = data[:, 1:1 + 4 * m].reshape(len(data), m, 4)
        if T is None:
            T = float(np.median(np.diff(data[:, 0]))) if len(data) > 1 else math.nan
        taus = block[:, :, 3]
        return cls(joints, T, data[:, 0], block[:, :, 0], block[:, :, 1], block[:, :, 2], taus,
                   data[:, -3], data[:, -2], data[:, -1],
                   max_abs_tau={j: float(np.max(np.abs(taus[:, i]), initial=0.0)) for i, j in enumerate(joints)},
                   resolution=csv_resolution(data[:, 1:1 + 4 * m]))


def csv_resolution(values: np.ndarray) -> float:
    """Worst-case rounding error of a value printed with CSV_FORMAT."""
    big = float(np.max(np.abs(values), initial=0.0))
    if big == 0.0:
        return 0.0
    return 0.5 * 10.0 ** (math.floor(math.log10(big)) - 9)


def _round_like_csv(x: float) -> float:
    return float(CSV_FORMAT % x)


def _sequence(cfg: ScenarioConfig):
    initial, switches = TASK_SEQUENCES[cfg.task]
    if cfg.initial_mode is None and not cfg.switches:
        return initial, switches
    return cfg.initial_mode or initial, cfg.switches


def run_scenario(cfg: ScenarioConfig, seed: int = 0) -> ScenarioLog:
    n_tick = check_rates(cfg.T_c, cfg.T_g)
    robot = cfg.robot
    joints = robot.joint_names
    wheel = robot.wheel_joint
    initial, switches = _sequence(cfg)
    gen = MotionGenerator(robot, GaitParams(cfg.v, cfg.f_w, cfg.h, v_cap=cfg.v_cap), initial, switches)
    rng = np.random.default_rng(seed)

    seeds = {a: np.array(MODE_JOINTS[initial][a], dtype=float) for a in ARM_NAMES}
    last_target = {a: None for a in ARM_NAMES}
    prev_q = {a: None for a in ARM_NAMES}
    limits = {a: robot.arm_limits(a) for a in ARM_NAMES}
    scripted = FIG5_JOINT if cfg.task == "fig5_validation" else None

    filters = {j: new_filter(cfg.limits[j], cfg.T_g, cfg.w1, cfg.w2) for j in joints}
    start = {j: q for a in ARM_NAMES for j, q in zip(robot.arms[a].joint_names, seeds[a])}
    start[wheel] = 0.0
    if scripted:
        start[scripted] = fig5_command(0.0)
    plant = {j: JointState(start[j], 0.0) for j in joints}
    ctrl = {j: reset(cfg.gains[j], start[j]) for j in joints}
    gains = [cfg.gains[j] for j in joints]
    params = [cfg.plant[j] for j in joints]

    N = cfg.n_samples
    m = len(joints)
    out = {k: np.zeros((N, m)) for k in ("cmd", "ref", "meas", "tau")}
    rate_ref = np.zeros(N)
    rate = np.zeros(N)
    base_x = np.zeros(N)
    max_tau = dict.fromkeys(joints, 0.0)
    x = 0.0
    wheel_cmd = 0.0
    prev_ref: list[float] | None = None
    states = [plant[j] for j in joints]
    ctrls = [ctrl[j] for j in joints]
    wi = joints.index(wheel)
    d = robot.wheel_diameter
    T_c = cfg.T_c

    for k in range(N):
        t = k * cfg.T_g
        targets, w_rate = gen.command(t)
        cmd = {}
        for a in ARM_NAMES:
            tgt = targets[a]
            if last_target[a] is None or not np.array_equal(tgt, last_target[a]):
                # extrapolated seed: targets move smoothly between samples
                guess = 2.0 * seeds[a] - prev_q[a] if prev_q[a] is not None else seeds[a]
                prev_q[a] = seeds[a]
                try:
                    seeds[a] = inverse_kinematics(robot.arms[a], tgt, guess, limits[a])
                except IKError as exc:
                    raise ScenarioError(f"IK failure for {a} at t = {t:.4f} s, target "
                                        f"{np.round(tgt, 6).tolist()}: {exc}") from None
                last_target[a] = tgt
            cmd.update(zip(robot.arms[a].joint_names, seeds[a]))
        if k:
            wheel_cmd += cfg.T_g * w_rate
        cmd[wheel] = wheel_cmd
        if scripted:
            cmd[scripted] = fig5_command(t)
        ref = [filter_step(filters[j], float(cmd[j])) for j in joints]

        out["cmd"][k] = [cmd[j] for j in joints]
        out["ref"][k] = ref
        out["meas"][k] = [s.theta for s in states]
        out["tau"][k] = [c.tau_prev for c in ctrls]
        rate_ref[k] = w_rate
        rate[k] = states[wi].theta_dot
        base_x[k] = x

        if prev_ref is None:
            prev_ref = ref
        for i in range(m):
            g, p, st, c = gains[i], params[i], states[i], ctrls[i]
            r0, r1 = prev_ref[i], ref[i]
            peak = max_tau[joints[i]]
            for tick in range(1, n_tick + 1):
                r = r0 + (r1 - r0) * tick / n_tick
                theta = st.theta
                if cfg.noise:
                    theta += cfg.noise * rng.standard_normal()
                tau = psmc_step(g, c, r, theta, T_c)
                if abs(tau) > peak:
                    peak = abs(tau)
                st = joint_step(p, st, tau, T_c, t + (tick - 1) * T_c)
                if i == wi:
                    x = base_odometry(st.theta_dot, d, T_c, x)
            states[i] = st
            max_tau[joints[i]] = peak
        prev_ref = ref

    return ScenarioLog(joints, cfg.T_g, np.arange(N) * cfg.T_g, out["cmd"], out["ref"], out["meas"],
                       out["tau"], rate_ref, rate, base_x, max_tau,
                       {j: filters[j].infeasible for j in joints})


def audit_log(log: ScenarioLog, limits: dict[str, JointLimits],
              torque_limits: dict[str, float]) -> list[Violation]:
    """Reference bounds for every joint plus |tau| <= F with no tolerance."""
    out: list[Violation] = []
    for i, j in enumerate(log.joints):
        out += audit_reference(log.ref[:, i], limits[j], log.T, j, resolution=log.resolution)
        F = torque_limits[j]
        if log.resolution is not None:
            F = _round_like_csv(F)
            peak = float(np.max(np.abs(log.tau[:, i]), initial=0.0))
        else:
            peak = log.max_abs_tau.get(j, float(np.max(np.abs(log.tau[:, i]), initial=0.0)))
        if peak > F:
            out.append(Violation(j, "torque", int(np.argmax(np.abs(log.tau[:, i]))), peak, F))
    return out


# -- limits sidecar ---------------------------------------------------------

LIMIT_FIELDS = ("angle_min", "angle_max", "speed_max", "accel_min", "accel_max", "torque_limit")


def write_limits(path: str | Path, cfg: ScenarioConfig):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("joint," + ",".join(LIMIT_FIELDS) + ",T\n")
        for j in cfg.robot.joint_names:
            lim = cfg.limits[j]
            vals = (lim.angle_min, lim.angle_max, lim.speed_max, lim.accel_min, lim.accel_max,
                    cfg.gains[j].F, cfg.T_g)
            fh.write(j + "," + ",".join(repr(float(v)) for v in vals) + "\n")


def read_limits(path: str | Path) -> tuple[dict[str, JointLimits], dict[str, float], float]:
    limits, torque = {}, {}
    T = math.nan
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            v = {k: float(row[k]) for k in LIMIT_FIELDS}
            limits[row["joint"]] = JointLimits(v["angle_min"], v["angle_max"], v["speed_max"],
                                               v["accel_min"], v["accel_max"])
            torque[row["joint"]] = v["torque_limit"]
            T = float(row["T"])
    return limits, torque, T


def limits_path_for(log_path: str | Path) -> Path:
    p = Path(log_path)
    return p.with_name(p.stem + "_limits.csv")
