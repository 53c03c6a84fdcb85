from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from heli_lqr.cli import DEFAULT_CORNERS  # noqa: E402
from heli_lqr.control import BoundedController, ControlLimits  # noqa: E402
from heli_lqr.lqr import solve_care  # noqa: E402
from heli_lqr.model import build_model, default_params  # noqa: E402
from heli_lqr.sim import SimConfig, make_rect_circle, make_rectangle, run_closed_loop  # noqa: E402
from heli_lqr.tracking import TrackingWeights, augment  # noqa: E402

CASE_WEIGHTS = {
    "case1": (0.01, 0.01, 0.01),
    "case3": (5.0, 1.0, 1.0),
}


@pytest.fixture(scope="session")
def cruise():
    return default_params("cruise")


@pytest.fixture(scope="session")
def hover():
    return default_params("hover")


@pytest.fixture(scope="session")
def cruise_model(cruise):
    return build_model(cruise)


@pytest.fixture(scope="session")
def case3_aug(cruise_model):
    return augment(cruise_model, TrackingWeights.scaled(*CASE_WEIGHTS["case3"]))


@pytest.fixture(scope="session")
def case3_solution(case3_aug):
    a = case3_aug
    return solve_care(a.A_aug, a.B_aug, a.weights.Q, a.weights.R)


@pytest.fixture(scope="session")
def rectangle():
    return make_rectangle(DEFAULT_CORNERS)


@pytest.fixture(scope="session")
def rect_circle():
    return make_rect_circle(DEFAULT_CORNERS)


def run_case(model, solution, eta, ref, bounded):
    limits = ControlLimits.default() if bounded else ControlLimits.unbounded()
    cfg = SimConfig(duration=ref.duration, initial_position=tuple(ref.position_at(0.0)))
    return run_closed_loop(model, BoundedController(solution.F, limits), ref, cfg, eta=eta)


# --------------------------------------------------------------------------- acceptance reporting

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """``record(tag, title, ok, detail)`` logs one pass/fail line, then asserts ``ok``."""

    def record(tag: str, title: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {tag} {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
