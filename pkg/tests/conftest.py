import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# first calls compile kernels, so per-example deadlines are meaningless
settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def cart():
    from seqaction.benchmarks.cart_pendulum import cart_pendulum

    return cart_pendulum(reduced=True)


@pytest.fixture(scope="session")
def cart_full():
    from seqaction.benchmarks.cart_pendulum import cart_pendulum

    return cart_pendulum(reduced=False)


@pytest.fixture(scope="session")
def di():
    from seqaction.benchmarks import double_integrator

    return double_integrator()


@pytest.fixture(scope="session")
def bounce():
    from seqaction.benchmarks.bouncing import bounce_1d

    return bounce_1d()


@pytest.fixture(scope="session")
def ball():
    from seqaction.benchmarks.bouncing import bouncing_ball

    return bouncing_ball()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::test_criterion_" in report.nodeid:
        name = report.nodeid.split("::test_criterion_")[1]
        line = f"criterion {name}: {'PASS' if report.passed else 'FAIL'}"
        if report.failed:
            msg = str(report.longrepr.reprcrash.message) if hasattr(report.longrepr, "reprcrash") else ""
            line += f" ({msg.splitlines()[0][:160]})" if msg else ""
        _CRITERIA.append(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
