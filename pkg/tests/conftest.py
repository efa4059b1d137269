import functools
import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from quadarm.config import parse_config  # noqa: E402
from quadarm.harness import run_scenario  # noqa: E402
from quadarm.robot_model import load_robot  # noqa: E402

SCENARIOS = ("walking", "driving", "driving_grasp", "carry_bag", "fig5_validation")


def scenario_path(name: str) -> Path:
    return Path(str(resources.files("quadarm") / "scenarios" / f"{name}.ini"))


@functools.lru_cache(maxsize=None)
def bundled_run(name: str):
    """(config, log) of a bundled scenario; simulated once per test session."""
    cfg = parse_config(scenario_path(name))
    return cfg, run_scenario(cfg)


@pytest.fixture(scope="session")
def robot():
    return load_robot()


# (criterion, title, passed, detail) rows filled in by test_acceptance
ACCEPTANCE: list[tuple[int, str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}")
