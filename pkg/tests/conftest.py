import os
import sys
import time
import warnings

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from dalyap.catalog import example_map  # noqa: E402
from dalyap.lyapunov import DirectSum, solve_embryo  # noqa: E402

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE: list[tuple[str, bool, str]] = []
_T0 = [0.0]


def pytest_sessionstart(session):
    _T0[0] = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    elapsed = time.perf_counter() - _T0[0]
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        tr.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    # the wall-clock half of criterion 8 can only be judged once the run is over
    tr.write_line(f"{'PASS' if elapsed <= 900 else 'FAIL'} criterion 8 (suite runtime): "
                  f"{elapsed:.0f} s of 900 s")


@pytest.fixture(scope="session")
def ex1_embryo_4096():
    t = time.perf_counter()
    V = solve_embryo(example_map(1), 4096)
    return V, time.perf_counter() - t


@pytest.fixture(scope="session")
def ex4_embryo_625():
    return solve_embryo(example_map(4), 625, DirectSum())


@pytest.fixture(scope="session")
def ex3_embryo_54():
    return solve_embryo(example_map(3), 54)


@pytest.fixture(scope="session")
def ex5_embryo_256():
    return solve_embryo(example_map(5), 256)


@pytest.fixture(scope="session")
def ex6_embryo_54():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return solve_embryo(example_map(6), 54)
