import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from airy_evolve import (  # noqa: E402
    Aperture,
    ForceProfile,
    GridSpec,
    PhysicalConstants,
    StepScheme,
    ai_packet,
    evolve,
)

DESK_GRID = GridSpec(-60.0, 60.0, 4096)
DESK_APERTURE = Aperture(-40.0, 40.0, 8.0)
DESK_WINDOW = (-10.0, 10.0)
DESK_SNAPSHOTS = (0.5, 1.0, 1.5, 2.0)
UNIT = PhysicalConstants(hbar=1.0, mass=1.0, b=1.0)

_criteria_lines = []


def record_criterion(number, passed, detail):
    _criteria_lines.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if _criteria_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criteria_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    return record_criterion


def _run(force, scheme=None, t_end=2.0, snapshots=DESK_SNAPSHOTS):
    scheme = scheme or StepScheme("split_step_strang", 1e-3)
    init = ai_packet(UNIT.b, 0.0, DESK_GRID)
    return evolve(init, UNIT, force, scheme, DESK_APERTURE, t_end, snapshots)


@pytest.fixture(scope="session")
def free_run():
    return _run(ForceProfile.zero())


@pytest.fixture(scope="session")
def constant_run():
    return _run(ForceProfile.constant(0.5))


@pytest.fixture(scope="session")
def cancel_run():
    return _run(ForceProfile.constant(-UNIT.f_b))


@pytest.fixture(scope="session")
def sinusoid_run():
    dt = math.pi / 3140
    return _run(
        ForceProfile.sinusoid(1.0, 1.0),
        StepScheme("split_step_strang", dt),
        t_end=math.pi,
        snapshots=(math.pi / 4, math.pi / 2, 3 * math.pi / 4, math.pi),
    )


@pytest.fixture(scope="session")
def free_run_cn():
    return _run(ForceProfile.zero(), StepScheme("crank_nicolson", 1e-3), t_end=1.0, snapshots=(1.0,))
