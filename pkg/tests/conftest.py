"""Shared fixtures: scenario runs are expensive, so each builtin scenario is
run once per session and the (trace, report, wall seconds) triple is reused by
behavior and acceptance tests alike."""

import time

import pytest

ACCEPTANCE_VERDICTS: list[str] = []


def record_verdict(line: str) -> None:
    ACCEPTANCE_VERDICTS.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.line(line)

from fieldrover.scenarios import builtin_scenarios
from fieldrover.simulate import run_scenario


@pytest.fixture(scope="session")
def scenario_runs():
    runs = {}
    for name, builder in builtin_scenarios().items():
        t0 = time.perf_counter()
        trace, report = run_scenario(builder())
        runs[name] = (trace, report, time.perf_counter() - t0)
    return runs


@pytest.fixture(scope="session")
def open_field_run(scenario_runs):
    return scenario_runs["open-field"]


@pytest.fixture(scope="session")
def hallway_run(scenario_runs):
    return scenario_runs["hallway-circuit"]


@pytest.fixture(scope="session")
def tunnel_run(scenario_runs):
    return scenario_runs["tunnel-open"]
