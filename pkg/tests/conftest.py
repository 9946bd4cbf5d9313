import numpy as np
import pytest

from envcap.tensor import BipartiteShape, DensityOperator, PureStateVector, haar_random_state


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_pure(shape: BipartiteShape, rng) -> PureStateVector:
    return PureStateVector(haar_random_state(shape.total, rng), shape)


def random_density(dim: int, rng, rank=None) -> DensityOperator:
    from envcap.tensor import random_density_matrix

    return DensityOperator(random_density_matrix(dim, rng, rank=rank), dim)


def maximally_entangled(d: int) -> PureStateVector:
    v = np.zeros(d * d, dtype=complex)
    v[:: d + 1] = 1.0 / np.sqrt(d)
    return PureStateVector(v, BipartiteShape(d, d))


def bell_states():
    """The four maximally entangled qubit-pair states."""
    s = 1.0 / np.sqrt(2.0)
    shape = BipartiteShape(2, 2)
    return [
        PureStateVector(np.array([s, 0, 0, s]), shape),
        PureStateVector(np.array([s, 0, 0, -s]), shape),
        PureStateVector(np.array([0, s, s, 0]), shape),
        PureStateVector(np.array([0, s, -s, 0]), shape),
    ]
