import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20160229)


def random_interior(rng, n_knots, lo=0.0, spread=(0.2, 2.0)):
    """Strictly ascending, unevenly spaced knots."""
    return lo + np.concatenate([[0.0], np.cumsum(rng.uniform(*spread, n_knots - 1))])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
