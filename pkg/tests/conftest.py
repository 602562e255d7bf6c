import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bhlab.spectral import GridSpec, RealField

settings.register_profile("bhlab", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("bhlab")


def bandlimited(seed, grid, kmax=8, decay=1.0):
    """Seeded mean-free trigonometric polynomial with a closed-form evaluator."""
    rng = np.random.default_rng(seed)
    k = np.arange(1, kmax + 1)
    amp = rng.normal(size=kmax) / k ** decay
    ph = rng.uniform(0, 2 * np.pi, kmax)
    kap = grid.kappa(k)

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.sum(amp * np.cos(kap * x[..., None] + ph), axis=-1)

    def fx(x):
        x = np.asarray(x, dtype=float)
        return np.sum(-amp * kap * np.sin(kap * x[..., None] + ph), axis=-1)

    return RealField(grid, f(grid.nodes)), f, fx


@pytest.fixture
def grid64():
    return GridSpec(64, 2 * np.pi)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
