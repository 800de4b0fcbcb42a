import numpy as np
import pytest

from qfamp import build_ndpa, stability

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def random_stable_ndpas(rng, n, lossy=True):
    """Draw ``n`` stable NDPAs with random rates and detunings."""
    out = []
    while len(out) < n:
        kappa = rng.uniform(0.5, 2.0)
        plant = build_ndpa(kappa, rng.uniform(-0.45, 0.45) * kappa, rng.uniform(-1, 1), rng.uniform(-1, 1),
                           rng.uniform(0.0, 0.3) if lossy else 0.0)
        if stability(plant).stable:
            out.append(plant)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
