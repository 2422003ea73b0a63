import numpy as np
import pytest

from kerrmeter import DensityMatrix, ModelParams, SpaceSignature


@pytest.fixture(scope="session")
def desk_params():
    return ModelParams(beta=0.3, g=0.3, gamma=0.125, epsilon=0.0, fock_dim=60)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)


def random_density_matrix(rng, dim):
    """Random full-rank density matrix (Hermitian, PSD, trace 1)."""
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def random_composite_density(rng, fock_dim):
    return DensityMatrix(
        SpaceSignature.composite(fock_dim),
        random_density_matrix(rng, 2 * fock_dim),
    )
