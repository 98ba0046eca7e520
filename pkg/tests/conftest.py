import numpy as np
import pytest

from robust_vmc.qmath import DensityMatrix, PureStateVector


def random_density(rng: np.random.Generator, num_spins: int) -> DensityMatrix:
    dim = 1 << num_spins
    G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = G @ G.conj().T
    return DensityMatrix(num_spins, rho / np.trace(rho))


def random_pure(rng: np.random.Generator, num_spins: int) -> PureStateVector:
    dim = 1 << num_spins
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return PureStateVector(num_spins, v / np.linalg.norm(v))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
