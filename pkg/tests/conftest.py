import pathlib

import numpy as np
import pytest

from pwqnewton import ProjectionProblem, load_matrix_market

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def afiro_matrix():
    return load_matrix_market(FIXTURES / "afiro.mtx")


@pytest.fixture(scope="session")
def afiro_b():
    return np.loadtxt(FIXTURES / "afiro_b.txt")


@pytest.fixture()
def afiro_problem(afiro_matrix, afiro_b):
    return ProjectionProblem(afiro_matrix, afiro_b, np.zeros(afiro_matrix.n))


@pytest.fixture(scope="session")
def adlittle_matrix():
    return load_matrix_market(FIXTURES / "adlittle.mtx")


@pytest.fixture(scope="session")
def adlittle_b():
    return np.loadtxt(FIXTURES / "adlittle_b.txt")


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
