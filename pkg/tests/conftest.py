import math
import time
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlexchange.grid import BoxDomain, build_field
from nlexchange.kernels import prototype_pair

warnings.filterwarnings("ignore", message=".*TBB.*")

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

K = 2.0 * math.pi

FIELD_SPECS = {
    "constant": {"family": "constant", "c": [0.0, 0.0, 1.0]},
    "linear": {"family": "linear", "A": [[1.0, 0.2, 0.0], [0.0, 1.0, 0.3], [0.1, 0.0, 1.0]]},
    "helix": {"family": "helix", "k": K},
    "skyrmion_bubble": {"family": "skyrmion_bubble", "radius": 0.25, "chirality": 1, "sphere": True},
    "random_bandlimited": {"family": "random_bandlimited", "seed": 7, "max_frequency": 2},
}


@pytest.fixture(scope="session")
def pair():
    return prototype_pair()


@pytest.fixture(scope="session")
def cube6():
    return BoxDomain.cube(6)


@pytest.fixture(scope="session")
def cube8():
    return BoxDomain.cube(8)


def field_on(domain, name):
    return build_field(domain, FIELD_SPECS[name])


@pytest.fixture(scope="session")
def helix_sweep_64(pair):
    """The 64^3 helix sweep shared by the convergence tests and the acceptance gate."""
    from nlexchange.convergence_lab import sweep

    t0 = time.perf_counter()
    m = build_field(BoxDomain.cube(64), FIELD_SPECS["helix"])
    A = np.eye(3) / 3.0
    D = np.eye(3) / 3.0
    sw = sweep(pair, m, [0.16, 0.08, 0.04], A, D, field_id="helix")
    sw.wall_seconds = time.perf_counter() - t0
    return sw


_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(name: str, passed: bool, detail: str) -> str:
    line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance gate")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
