import pytest

from backstepping2d import BoundaryGraph, build_grid, piano_default

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def piano81():
    return build_grid(piano_default(), 81)


@pytest.fixture(scope="session")
def piano41():
    return build_grid(piano_default(), 41)


@pytest.fixture(scope="session")
def square41():
    return build_grid(BoundaryGraph.constant(1.0), 41)


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def _report(name, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
