import numpy as np
import pytest
from scipy.linalg import expm

from fockwave.operators import SLH, MultiModeSLH


def random_operator(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def random_hermitian(rng, d):
    a = random_operator(rng, d)
    return 0.5 * (a + a.conj().T)


def random_unitary(rng, d):
    return expm(1j * random_hermitian(rng, d))


def random_density(rng, d):
    a = random_operator(rng, d)
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_slh(rng, d=2):
    return SLH(random_unitary(rng, d), 0.7 * random_operator(rng, d), random_hermitian(rng, d))


def random_two_mode_slh(rng, d=2):
    """Random unitary block matrix split into the 2x2 operator array."""
    u = random_unitary(rng, 2 * d)
    s = [[u[i * d:(i + 1) * d, j * d:(j + 1) * d] for j in range(2)] for i in range(2)]
    return MultiModeSLH(s, [0.6 * random_operator(rng, d), 0.5 * random_operator(rng, d)],
                        random_hermitian(rng, d))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
