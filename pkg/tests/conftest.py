import numpy as np
import pytest

from splitkit.problem import LassoSpec, generate_lasso


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_lasso():
    prob, x_true = generate_lasso(LassoSpec(n=20, m=16, s=2, seed=4))
    return prob, x_true


def random_lasso(seed, n=12, m=10, s=2, **kw):
    return generate_lasso(LassoSpec(n=n, m=m, s=s, seed=seed, **kw), force=True)[0]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
