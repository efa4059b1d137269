"""SVG figures for a scenario log, byte-stable for a given log."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import ScenarioLog  # noqa: E402

MAX_POINTS = 4000
_RC = {"svg.hashsalt": "quadarm", "svg.fonttype": "none", "path.simplify": False,
       "font.size": 8}


def _stride(n: int) -> int:
    return max(1, -(-n // MAX_POINTS))


def _save(fig, path: Path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def joint_figure(log: ScenarioLog, joint: str):
    """Angle (command, reference, measured), velocity, acceleration and torque."""
    i = log.joints.index(joint)
    t, T = log.t, log.T
    cmd, ref, meas, tau = log.cmd[:, i], log.ref[:, i], log.meas[:, i], log.tau[:, i]
    k = _stride(len(t))
    fig, ax = plt.subplots(4, 1, sharex=True, figsize=(6.4, 7.2))
    ax[0].plot(t[::k], cmd[::k], lw=0.8, label="command")
    ax[0].plot(t[::k], ref[::k], lw=0.8, label="reference")
    ax[0].plot(t[::k], meas[::k], lw=0.8, ls="--", label="measured")
    ax[0].set_ylabel("angle [rad]")
    ax[0].legend(loc="best", fontsize=7)
    if len(t) > 1:
        ax[1].plot(t[1::k], (np.diff(ref) / T)[::k], lw=0.8, label="reference")
        ax[1].plot(t[1::k], (np.diff(meas) / T)[::k], lw=0.8, ls="--", label="measured")
        ax[1].legend(loc="best", fontsize=7)
    ax[1].set_ylabel("velocity [rad/s]")
    if len(t) > 2:
        ax[2].plot(t[2::k], (np.diff(ref, 2) / T**2)[::k], lw=0.8)
    ax[2].set_ylabel("accel. [rad/s$^2$]")
    ax[3].plot(t[::k], tau[::k], lw=0.8)
    ax[3].set_ylabel("torque [N m]")
    ax[3].set_xlabel("time [s]")
    fig.suptitle(joint)
    fig.tight_layout()
    return fig


def base_figure(log: ScenarioLog):
    k = _stride(len(log.t))
    fig, ax = plt.subplots(2, 1, sharex=True, figsize=(6.4, 4.0))
    ax[0].plot(log.t[::k], log.base_x[::k], lw=0.8)
    ax[0].set_ylabel("base x [m]")
    ax[1].plot(log.t[::k], log.wheel_rate_ref[::k], lw=0.8, label="reference")
    ax[1].plot(log.t[::k], log.wheel_rate[::k], lw=0.8, ls="--", label="measured")
    ax[1].set_ylabel("wheel rate [rad/s]")
    ax[1].set_xlabel("time [s]")
    ax[1].legend(loc="best", fontsize=7)
    fig.tight_layout()
    return fig


def emit_plots(log: ScenarioLog, out_dir: str | Path, joints=None) -> list[Path]:
    """One SVG per joint plus ``base.svg``.  Returns the written paths."""
    if len(log) == 0:
        raise ValueError("cannot plot an empty log")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    with plt.rc_context(_RC):
        for j in joints or log.joints:
            p = out / f"{j}.svg"
            _save(joint_figure(log, j), p)
            paths.append(p)
        p = out / "base.svg"
        _save(base_figure(log), p)
        paths.append(p)
    return paths
