import math

import numpy as np
import pytest

from adlbr.cli import rotated_tensor

ACCEPTANCE_LINES = []


def random_rotation(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def random_spd(rng, d, kappa_max=100.0):
    """SPD matrix with anisotropy ratio at most ``kappa_max`` and random scale."""
    R = random_rotation(rng, d)
    k = math.exp(rng.uniform(0, math.log(kappa_max)))
    top = math.exp(rng.uniform(-1, 1))
    ev = top * k ** (-2 * rng.uniform(0, 1, d))
    ev[0], ev[1] = top, top / k**2
    D = (R * ev) @ R.T
    return 0.5 * (D + D.T)


def reference_tensor(kappa, theta=math.pi / 6):
    return rotated_tensor(kappa, theta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
