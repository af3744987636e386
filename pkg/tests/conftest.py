import numpy as np
import pytest

from fablekit.generators import gen_uniform_sparse


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_dense(rng, n):
    N = 1 << n
    return rng.uniform(-1.0, 1.0, (N, N))


def random_sparse(n, s, seed):
    return gen_uniform_sparse(n, s, seed)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
