import math

import pytest
from hypothesis import HealthCheck, settings

from pilotwave_sg.spinor import Spinor
from pilotwave_sg.wavefield import DeviceConfig

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def fig2_spinor():
    return Spinor(math.sqrt(2 / 3), math.sqrt(1 / 3))


@pytest.fixture
def device():
    return DeviceConfig()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion for the run summary."""

    def record(number: int, name: str, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} :: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
