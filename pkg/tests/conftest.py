import numpy as np
import pytest
from hypothesis import settings

from ucmanifold.cli import bundled
from ucmanifold.model import ScenarioConfig, UCProblem, UnitSpec, read_scenario, read_units
from ucmanifold.network import Branch, NetworkCase, read_case

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ieee30_case():
    return read_case(bundled("ieee30.case"))


@pytest.fixture(scope="session")
def ieee30_units(ieee30_case):
    return read_units(bundled("ieee30_units.csv"), ieee30_case)


@pytest.fixture(scope="session")
def ieee30(ieee30_case, ieee30_units):
    sc = read_scenario(bundled("ieee30_scenario.json"), ieee30_case, "20", "15")
    return UCProblem(ieee30_case, ieee30_units, sc)


@pytest.fixture
def triangle():
    """Three buses, equal lossy lines, bus 0 is the slack."""
    br = (Branch(0, 1, 1.0, 5.0, 100.0), Branch(1, 2, 1.0, 5.0, 100.0), Branch(0, 2, 1.0, 5.0, 100.0))
    return NetworkCase(("a", "b", "c"), br)


def lossless_pair(capacity=1000.0):
    return NetworkCase(("1", "2"), (Branch(0, 1, 0.0, 10.0, capacity),))


def toy_units():
    cheap = UnitSpec("cheap", 0, 10.0, 100.0, 1, 1, 100.0, 100.0, 0.01, 2.0, 10.0, 50.0, 5.0, 24, 50.0)
    dear = UnitSpec("dear", 0, 10.0, 100.0, 1, 1, 100.0, 100.0, 0.02, 5.0, 20.0, 80.0, 8.0, -24, 0.0)
    return [cheap, dear]


def toy_problem(demand=50.0, hours=24, inputs=()):
    case = lossless_pair()
    sc = ScenarioConfig(load_profile=np.full(hours, demand), bus_shares=[0.0, 1.0], inputs=inputs)
    return UCProblem(case, toy_units(), sc)


def toy_optimum(demand=50.0, hours=24):
    return hours * (0.01 * demand**2 + 2.0 * demand + 10.0)


# acceptance results, printed as one line per criterion at the end of the run
ACCEPTANCE = {}


def record(number, title, ok, detail=""):
    ACCEPTANCE[number] = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
