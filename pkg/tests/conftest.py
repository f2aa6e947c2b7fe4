from pathlib import Path

import numpy as np
import pytest

from rangeloc.model import MeasurementSet, Scenario, reference_scenario, simulate

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def ref():
    return reference_scenario(1.0)


@pytest.fixture
def noiseless_meas():
    """Exact ranges for the reference deployment, two repeats per sensor."""

    def make(scenario: Scenario) -> MeasurementSet:
        r = scenario.true_ranges()
        return MeasurementSet.from_grouped(np.repeat(r[:, None], scenario.repeats, axis=1))

    return make


@pytest.fixture
def noisy(ref):
    return simulate(ref, 7)


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(label: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        _CRITERIA.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
