"""Post-hoc constraint audit of reference sequences.

Works on whole arrays with numpy finite differences so it shares no code
with the online filter it is checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .robot_model import JointLimits

AUDIT_TOL = 1e-9


@dataclass
class Violation:
    joint: str
    kind: str          # "angle", "velocity" or "acceleration"
    index: int
    value: float
    bound: float

    def __str__(self):
        return f"{self.joint}: {self.kind} {self.value:.12g} beyond {self.bound:.12g} at sample {self.index}"


def difference_floor(values: np.ndarray, T: float, resolution: float | None = None) -> tuple[float, float, float]:
    """Slack for angle, velocity and acceleration checks due to how finely the
    angles are represented.

    ``resolution`` is the absolute representation error of one stored angle.
    For in-memory doubles it defaults to one ulp of the largest magnitude;
    difference quotients amplify it by 2/T and 4/T**2.
    """
    if resolution is None:
        resolution = float(np.spacing(np.max(np.abs(values)))) if len(values) else 0.0
    return resolution, 2.0 * resolution / T, 4.0 * resolution / T**2


def audit_reference(values, limits: JointLimits, T: float, joint: str = "",
                    atol: float = AUDIT_TOL, resolution: float | None = None,
                    limit: int = 20) -> list[Violation]:
    """Check angle, backward-difference velocity and acceleration bounds."""
    x = np.asarray(values, dtype=float)
    out: list[Violation] = []
    if x.size == 0:
        return out
    fa, fv, fac = difference_floor(x, T, resolution)

    def collect(kind, series, lo, hi, slack, offset):
        bad = np.flatnonzero((series < lo - slack) | (series > hi + slack))
        for i in bad[: limit - len(out)]:
            v = float(series[i])
            out.append(Violation(joint, kind, int(i) + offset, v, lo if v < lo else hi))

    collect("angle", x, limits.angle_min, limits.angle_max, atol + fa, 0)
    vel = np.diff(x) / T
    collect("velocity", vel, limits.vel_min, limits.vel_max, atol + fv, 1)
    acc = np.diff(x, 2) / T**2
    collect("acceleration", acc, limits.accel_min, limits.accel_max, atol + fac, 2)
    return out
