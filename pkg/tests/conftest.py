import warnings

import pytest

from omitsim import experimental_drive, experimental_system, scaled_system, solve_operating_point


@pytest.fixture(scope="session")
def expt():
    return experimental_system()


@pytest.fixture(scope="session")
def op_1mw(expt):
    return solve_operating_point(expt, experimental_drive(1.0))


@pytest.fixture(scope="session")
def op_69mw(expt):
    return solve_operating_point(expt, experimental_drive(6.9))


@pytest.fixture(scope="session")
def scaled():
    return scaled_system()


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line and fail the test when ``ok`` is false."""

    def record(number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        request.config._acceptance_lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
