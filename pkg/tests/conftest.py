import pytest

from helictl.params import ControllerParams, HelicopterParams
from helictl.scenario import paper_hover, prepare, run_scenario


@pytest.fixture(scope="session")
def heli():
    return HelicopterParams().validate()


@pytest.fixture(scope="session")
def ctrl():
    return ControllerParams().validate()


@pytest.fixture(scope="session")
def design(heli, ctrl):
    """(trim, model, gains) at hover with the default parameters."""
    return prepare(heli, ctrl)


@pytest.fixture(scope="session")
def trim(design):
    return design[0]


@pytest.fixture(scope="session")
def model(design):
    return design[1]


@pytest.fixture(scope="session")
def gains(design):
    return design[2]


@pytest.fixture(scope="session")
def mission_log(heli, ctrl, design):
    trim, _, gains = design
    return run_scenario(paper_hover(seed=42), heli, ctrl, gains, trim)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
