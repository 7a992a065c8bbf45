import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mssolve.geometry import InterfaceGeometry

settings.register_profile("mssolve", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("mssolve")

# criterion number -> (title, passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}
SUITE_BUDGET = 300.0
_START = {}


def pytest_sessionstart(session):
    _START["t"] = time.perf_counter()


@pytest.fixture
def acceptance():
    def record(number: int, title: str, passed: bool, detail: str):
        ACCEPTANCE[number] = (title, bool(passed), detail)
        print(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} ({detail})")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {n:2d}. {title}: {detail}")
    elapsed = time.perf_counter() - _START.get("t", time.perf_counter())
    ok = elapsed < SUITE_BUDGET
    terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}      full suite runtime: {elapsed:.1f} s "
                                f"(budget {SUITE_BUDGET:.0f} s)")


@pytest.fixture(scope="session")
def circle():
    return InterfaceGeometry.circle(1.0, 2.0, 0.2)


@pytest.fixture(scope="session")
def wavy():
    """Non-circular static interface ``rho = 1 + 0.05 cos 3 theta``."""
    return InterfaceGeometry.from_function(lambda th, t: 1 + 0.05 * np.cos(3 * th), 4, 2.0, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_real_field(rng, K, decay=2.0):
    from mssolve.sobolev import PeriodicField
    k = np.arange(0, K + 1)
    c = (rng.normal(size=K + 1) + 1j * rng.normal(size=K + 1)) / (1.0 + k) ** decay
    c[0] = c[0].real
    return PeriodicField.from_modes(K, dict(zip(k.tolist(), c)))
