from __future__ import annotations

import pytest

from mvdcflow.netmodel import builtin_architecture1

# lines recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def arch1():
    return builtin_architecture1()


@pytest.fixture(scope="session")
def arch1_mp():
    return builtin_architecture1("mazama_poppy")


@pytest.fixture
def record():
    def _record(line: str) -> None:
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
