import numpy as np
import pytest

from patchsel.landscape import Strategy, build_landscape, symmetric_landscape


def random_landscape(rng: np.random.Generator, n: int, mu_range=(-0.5, 2.0)):
    A = rng.uniform(-1.0, 1.0, size=(n, n))
    sigma = A.T @ A + 0.05 * np.eye(n)
    return build_landscape(n, rng.uniform(*mu_range, size=n), rng.uniform(0.2, 3.0, size=n), sigma)


def random_strategy(rng: np.random.Generator, n: int) -> Strategy:
    return Strategy(rng.dirichlet(np.ones(n)))


@pytest.fixture
def sym():
    return symmetric_landscape(2, a=1.0, sigma2=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
