import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from isocenter.funcmodel import builtin_catalog

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def catalog():
    return {m.name: m for m in builtin_catalog()}


def agm(a, b, iterations=40):
    for _ in range(iterations):
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return a


def pendulum_period(x0):
    """4 K(sin(x0/2)) with K from the arithmetic-geometric mean."""
    k = math.sin(0.5 * x0)
    return 2 * math.pi / agm(1.0, math.sqrt(1.0 - k * k))


@pytest.fixture(scope="session")
def pendulum_oracle():
    return pendulum_period


def random_phase_points(model, n, seed, box=1.0):
    rng = np.random.default_rng(seed)
    c = model.center
    out = []
    while len(out) < n:
        q1 = rng.uniform(0.8 * c.x_max_neg, 0.8 * c.x_max_pos)
        p2 = rng.uniform(-1, 1) * np.sqrt(2 * c.e_max)
        if 0.5 * p2 * p2 + float(model.V(q1)) < 0.8 * c.e_max:
            out.append([q1, rng.uniform(-box, box), rng.uniform(-box, box), p2])
    return np.array(out)


# lines recorded by the acceptance suite, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
