import numpy as np
import pytest

from discvortex.initial_data import ScenarioParams, VorticityFunction, build_omega0, discretize
from discvortex.solver import simulate


@pytest.fixture(scope="session")
def small_params():
    return ScenarioParams(delta=0.05, relaxed_mode=True, resolution_N=800)


@pytest.fixture(scope="session")
def small_omega0(small_params):
    return build_omega0(small_params)


@pytest.fixture(scope="session")
def small_state(small_params, small_omega0):
    return discretize(small_omega0, small_params)


@pytest.fixture(scope="session")
def unit_state(small_state):
    from dataclasses import replace

    return replace(small_state, omega=np.ones(small_state.n))


@pytest.fixture(scope="session")
def zero_state(small_state):
    from dataclasses import replace

    return replace(small_state, omega=VorticityFunction.constant_value(0.0)(small_state.positions))


@pytest.fixture(scope="session")
def small_timeline(small_state):
    return simulate(small_state, 0.02, 0.3, stops=[0.1, 0.2])


@pytest.fixture(scope="session")
def zero_timeline(zero_state):
    return simulate(zero_state, 0.05, 0.3)


ACCEPTANCE: dict[str, str] = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    """Store one acceptance line; printed in the terminal summary."""
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("abc")), k)):
        terminalreporter.write_line(ACCEPTANCE[key])
