import numpy as np
import pytest

from detmax import matroid as mt
from detmax.instance import Instance


@pytest.fixture
def partition_example():
    """v0=e1, v1=e2, v2=(0,10); parts {0}, {1,2} with one slot each."""
    vectors = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 10.0]])
    return Instance(vectors, mt.PartitionMatroid((0, 1, 1), (1, 1)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spanning_state(rng, d, r):
    from detmax.linalg import gram_build

    while True:
        vectors = rng.standard_normal((r, d))
        state = gram_build(vectors, range(r))
        if not state.singular:
            return vectors, state


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
