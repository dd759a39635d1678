import math

import numpy as np
import pytest

from mflab import build_torus


def bessel_i0(z: float, terms: int = 40) -> float:
    """Series oracle for the order-0 modified Bessel function."""
    total = 0.0
    term = 1.0
    for k in range(terms):
        if k > 0:
            term *= (z * z / 4.0) / (k * k)
        total += term
    return total


def trapezoid_periodic(f, m: int = 8192) -> float:
    """Oracle quadrature of a 1-periodic callable over [0, 1)."""
    x = np.arange(m) / m
    return float(np.mean(f(x)))


@pytest.fixture(scope="session")
def grid64():
    return build_torus(64)


@pytest.fixture(scope="session")
def grid128():
    return build_torus(128)


@pytest.fixture(scope="session")
def grid256():
    return build_torus(256)


@pytest.fixture(scope="session")
def grid64_conformal():
    return build_torus(64, lambda x1, x2: 0.2 * np.cos(2 * np.pi * x2))


@pytest.fixture(scope="session")
def conformal_family():
    """Five distinct smooth conformal factors for invariance sweeps."""
    return [
        lambda x1, x2: 0.1 * np.cos(2 * np.pi * x1),
        lambda x1, x2: 0.2 * np.cos(2 * np.pi * x2),
        lambda x1, x2: 0.3 * np.cos(2 * np.pi * (x1 + x2)),
        lambda x1, x2: 0.15 * np.cos(2 * np.pi * (2 * x1 - x2)),
        lambda x1, x2: (0.1 * np.cos(2 * np.pi * x1)
                        + 0.05 * np.sin(4 * np.pi * x2)),
    ]


def pytest_addoption(parser):
    parser.addoption("--skip-slow", action="store_true",
                     help="skip the long-running acceptance runs")
