import numpy as np
import pytest

from fraclap import build_space, decompose, fixture


@pytest.fixture(scope="session")
def k2():
    return build_space([[0, 1], [1, 0]], [1, 1], [[0, 1], [1, 0]])


@pytest.fixture(scope="session")
def p3():
    return fixture("path", n=3)


@pytest.fixture(scope="session")
def path8():
    return fixture("path", n=8)


@pytest.fixture(scope="session")
def grid44():
    return fixture("grid2d", nx=4)


@pytest.fixture(scope="session")
def dumbbell55():
    return fixture("dumbbell", clique=5)


@pytest.fixture(scope="session")
def k2_dec(k2):
    return decompose(k2)


@pytest.fixture(scope="session")
def p3_dec(p3):
    return decompose(p3)


@pytest.fixture(scope="session")
def path8_dec(path8):
    return decompose(path8)


@pytest.fixture(scope="session")
def grid44_dec(grid44):
    return decompose(grid44)


@pytest.fixture(scope="session")
def dumbbell55_dec(dumbbell55):
    return decompose(dumbbell55)


def random_vector(space, seed):
    return np.random.default_rng(seed).standard_normal(space.n)
