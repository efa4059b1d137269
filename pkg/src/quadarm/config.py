"""Scenario files: INI sections describing one simulated run.

Grammar (all keys optional unless noted; angles in rad, times in s)::

    [scenario]  task (required), duration (required), robot, T_c, T_g, noise
    [gait]      v, f_w, h, v_cap
    [filter]    w1, w2
    [plant]     inertia, damping, gravity, contact_level, contact_stiffness,
                contact_damping, contact_on, contact_off
    [plant.J]   same keys as [plant], for joint J only
    [psmc]      bandwidth, recovery_time
    [psmc.J]    M, B, K, L, J, H, F
    [limits.J]  angle_min, angle_max, speed_max, accel_min, accel_max
    [sequence]  initial = <mode>, then lines ``<time> = <mode or pick>``

Overrides in ``[limits.J]`` may only narrow the robot file's angle range
and speed; ``F`` may not exceed the joint's rated torque.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from ._ini import ConfigError, IniFile
from .motion_generator import ACTIONS, MODES
from .plant import Contact, PlantParams
from .psmc import PsmcGains, default_gains
from .robot_model import JointLimits, RobotModel, load_robot

TASKS = ("walking", "driving", "driving_grasp", "carry_bag", "fig5_validation")
DEFAULT_TC = 0.25e-3
DEFAULT_TG = 0.5e-3

_PLANT_KEYS = {"inertia", "damping", "gravity", "contact_level", "contact_stiffness",
               "contact_damping", "contact_on", "contact_off"}
_ALLOWED = {
    "scenario": {"task", "duration", "robot", "T_c", "T_g", "noise"},
    "gait": {"v", "f_w", "h", "v_cap"},
    "filter": {"w1", "w2"},
    "plant": _PLANT_KEYS,
    "psmc": {"bandwidth", "recovery_time"},
    "sequence": {"*"},
}
_PREFIXED = {
    "plant.": _PLANT_KEYS,
    "psmc.": {"M", "B", "K", "L", "J", "H", "F"},
    "limits.": {"angle_min", "angle_max", "speed_max", "accel_min", "accel_max"},
}


@dataclass
class ScenarioConfig:
    task: str
    duration: float
    robot: RobotModel
    T_c: float = DEFAULT_TC
    T_g: float = DEFAULT_TG
    noise: float = 0.0
    v: float = 0.1
    f_w: float = 0.5
    h: float = 0.03
    v_cap: float = math.inf
    w1: float = 1.0
    w2: float = 1.0
    plant: dict[str, PlantParams] = field(default_factory=dict)
    gains: dict[str, PsmcGains] = field(default_factory=dict)
    initial_mode: str | None = None       # None: the task's default script
    switches: list[tuple[float, str]] = field(default_factory=list)
    source: str = "<memory>"

    @property
    def limits(self) -> dict[str, JointLimits]:
        return self.robot.limits

    @property
    def ticks_per_sample(self) -> int:
        return int(round(self.T_g / self.T_c))

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.T_g))


def check_rates(T_c: float, T_g: float) -> int:
    if not (T_c > 0 and T_g > 0):
        raise ValueError("sampling times must be positive")
    n = round(T_g / T_c)
    if n < 1 or abs(n * T_c - T_g) > 1e-12 * T_g:
        raise ValueError(f"T_g = {T_g} is not an integer multiple of T_c = {T_c}")
    return n


def _plant_params(ini: IniFile, sec: str, base: PlantParams) -> PlantParams:
    g = lambda k, d: ini.get_float(sec, k, d)   # noqa: E731
    contact = base.contact
    if any(ini.has(sec, k) for k in _PLANT_KEYS if k.startswith("contact_")):
        prev = contact or Contact(ground_level=0.0)
        level = g("contact_level", prev.ground_level if contact else None)
        on = ini.get_float(sec, "contact_on", math.nan)
        off = ini.get_float(sec, "contact_off", math.nan)
        window = prev.window
        if not (math.isnan(on) and math.isnan(off)):
            if math.isnan(on) or math.isnan(off):
                raise ini.error(sec, "contact_on", "contact_on and contact_off go together")
            window = (on, off)
        try:
            contact = Contact(level, g("contact_stiffness", prev.stiffness),
                              g("contact_damping", prev.damping), window)
        except ValueError as exc:
            raise ini.error(sec, None, str(exc)) from None
    try:
        return replace(base, inertia=g("inertia", base.inertia), damping=g("damping", base.damping),
                       gravity_torque=g("gravity", base.gravity_torque), contact=contact)
    except ValueError as exc:
        raise ini.error(sec, None, str(exc)) from None


def _joint_of(ini: IniFile, sec: str, names: list[str]) -> str:
    joint = sec.split(".", 1)[1]
    if joint not in names:
        raise ini.error(sec, None, f"unknown joint {joint!r}")
    return joint


def parse_config(path: str | Path, text: str | None = None) -> ScenarioConfig:
    """Load and fully validate a scenario file."""
    ini = IniFile(path, text)
    ini.check_unknown(_ALLOWED, _PREFIXED)
    if not ini.has("scenario"):
        raise ConfigError(f"{ini.path}: missing section [scenario]")

    task = ini.get_str("scenario", "task")
    if task not in TASKS:
        raise ini.error("scenario", "task", f"unknown task {task!r}; expected one of {TASKS}")
    duration = ini.get_float("scenario", "duration")
    if not (duration >= 0 and math.isfinite(duration)):
        raise ini.error("scenario", "duration", "duration must be finite and non-negative")
    T_c = ini.get_float("scenario", "T_c", DEFAULT_TC)
    T_g = ini.get_float("scenario", "T_g", DEFAULT_TG)
    try:
        check_rates(T_c, T_g)
    except ValueError as exc:
        raise ini.error("scenario", "T_g", str(exc)) from None
    noise = ini.get_float("scenario", "noise", 0.0)
    if noise < 0:
        raise ini.error("scenario", "noise", "noise must be non-negative")

    robot_path = None
    if ini.has("scenario", "robot"):
        robot_path = Path(ini.get_str("scenario", "robot"))
        if not robot_path.is_absolute() and text is None:
            robot_path = Path(path).parent / robot_path
    robot = load_robot(robot_path)
    names = robot.joint_names

    # joint limit overrides: narrowing only
    overrides = {}
    for sec in ini.sections():
        if not sec.startswith("limits."):
            continue
        j = _joint_of(ini, sec, names)
        old = robot.limits[j]
        amin = ini.get_float(sec, "angle_min", old.angle_min)
        amax = ini.get_float(sec, "angle_max", old.angle_max)
        vmax = ini.get_float(sec, "speed_max", old.speed_max)
        if amin < old.angle_min or amax > old.angle_max:
            raise ini.error(sec, "angle_min" if amin < old.angle_min else "angle_max",
                            f"range [{amin}, {amax}] exceeds rated [{old.angle_min:.6g}, {old.angle_max:.6g}]")
        if vmax > old.speed_max:
            raise ini.error(sec, "speed_max", f"{vmax} exceeds rated speed {old.speed_max}")
        try:
            overrides[j] = JointLimits(amin, amax, vmax, ini.get_float(sec, "accel_min", old.accel_min),
                                       ini.get_float(sec, "accel_max", old.accel_max), old.torque_max)
        except ValueError as exc:
            raise ini.error(sec, None, str(exc)) from None
    if overrides:
        robot = robot.with_limits(**overrides)

    cfg = ScenarioConfig(task=task, duration=duration, robot=robot, T_c=T_c, T_g=T_g,
                         noise=noise, source=str(path))

    if ini.has("gait"):
        cfg.v = ini.get_float("gait", "v", cfg.v)
        cfg.f_w = ini.get_float("gait", "f_w", cfg.f_w)
        cfg.h = ini.get_float("gait", "h", cfg.h)
    wheel = robot.limits[robot.wheel_joint]
    cfg.v_cap = wheel.speed_max * robot.wheel_diameter / 2.0
    if ini.has("gait", "v_cap"):
        cfg.v_cap = ini.get_float("gait", "v_cap")
    if not cfg.f_w > 0:
        raise ini.error("gait", "f_w", "walking frequency must be positive")
    if not cfg.h > 0:
        raise ini.error("gait", "h", "swing height must be positive")
    if abs(cfg.v) > cfg.v_cap:
        raise ini.error("gait", "v", f"|v| = {abs(cfg.v)} exceeds the cap {cfg.v_cap:.6g} m/s")

    if ini.has("filter"):
        cfg.w1 = ini.get_float("filter", "w1", cfg.w1)
        cfg.w2 = ini.get_float("filter", "w2", cfg.w2)
        if cfg.w1 < 0 or cfg.w2 < 0:
            raise ini.error("filter", None, "weights must be non-negative")

    base = PlantParams()
    if ini.has("plant"):
        base = _plant_params(ini, "plant", base)
    for j in names:
        p = base
        if ini.has(f"plant.{j}"):
            p = _plant_params(ini, f"plant.{j}", base)
        cfg.plant[j] = replace(p, torque_max=robot.limits[j].torque_max)
    for sec in ini.sections():
        if sec.startswith("plant."):
            _joint_of(ini, sec, names)

    bw = ini.get_float("psmc", "bandwidth", 20.0) if ini.has("psmc") else 20.0
    rec = ini.get_float("psmc", "recovery_time", 0.05) if ini.has("psmc") else 0.05
    if not (bw > 0 and rec > 0):
        raise ini.error("psmc", None, "bandwidth and recovery_time must be positive")
    for sec in ini.sections():
        if sec.startswith("psmc."):
            _joint_of(ini, sec, names)
    for j in names:
        tmax = robot.limits[j].torque_max
        g = default_gains(cfg.plant[j].inertia, tmax, bw, rec)
        sec = f"psmc.{j}"
        if ini.has(sec):
            vals = {k: ini.get_float(sec, k, getattr(g, k)) for k in ("M", "B", "K", "L", "J", "H", "F")}
            if vals["F"] > tmax:
                raise ini.error(sec, "F", f"torque limit {vals['F']} exceeds rated {tmax} N m")
            try:
                g = PsmcGains(**vals)
            except ValueError as exc:
                raise ini.error(sec, None, str(exc)) from None
        cfg.gains[j] = g

    if ini.has("sequence"):
        if ini.has("sequence", "initial"):
            cfg.initial_mode = ini.get_str("sequence", "initial")
        if cfg.initial_mode is not None and cfg.initial_mode not in MODES:
            raise ini.error("sequence", "initial", f"unknown mode {cfg.initial_mode!r}")
        for key in ini.parser.options("sequence"):
            if key == "initial":
                continue
            try:
                t = float(key)
            except ValueError:
                raise ini.error("sequence", key, "expected '<time> = <mode>'") from None
            mode = ini.get_str("sequence", key)
            if mode not in MODES and mode not in ACTIONS:
                raise ini.error("sequence", key, f"unknown mode {mode!r}")
            if not (t >= 0 and math.isfinite(t)):
                raise ini.error("sequence", key, "switch time must be non-negative")
            cfg.switches.append((t, mode))
    return cfg
