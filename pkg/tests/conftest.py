import numpy as np
import pytest

from ocot import OrderedVariates, validate_problem


@pytest.fixture
def symmetric_2x2():
    return validate_problem([0.5, 0.5], [0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]])


def uniform_problem(rng, m, n):
    return validate_problem(np.full(m, 1.0 / m), np.full(n, 1.0 / n), rng.random((m, n)))


def random_variates(rng, m, n, k):
    rows = rng.choice(m, size=k, replace=False)
    cols = rng.choice(n, size=k, replace=False)
    return OrderedVariates(tuple(zip(rows.tolist(), cols.tolist())))
