"""
Shared fixtures: seeded generators and small test systems.
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from simulator.block_encoding import build_standard_encoding


def philox(seed):
    return np.random.Generator(np.random.Philox(seed))


def random_orthogonal(n, rng):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def spd_matrix(n, low, high, seed):
    """Q diag(linspace(low, high, n)) Q^T."""
    Q = random_orthogonal(n, philox(seed))
    A = (Q * np.linspace(low, high, n)) @ Q.T
    return 0.5 * (A + A.T)


@pytest.fixture
def rng():
    return philox(1234)


@pytest.fixture
def random_matrix():
    """Random 4x4 real matrix with spectral norm 0.9."""
    A = philox(11).standard_normal((4, 4))
    return 0.9 * A / np.linalg.norm(A, 2)


@pytest.fixture
def random_encoding(random_matrix):
    return build_standard_encoding(random_matrix, 1.0)


@pytest.fixture
def spd_system():
    """8x8 SPD matrix with spectrum in [0.2, 1] and a fixed unit right-hand side."""
    A = spd_matrix(8, 0.2, 1.0, seed=5)
    b = philox(6).standard_normal(8)
    return A, b / np.linalg.norm(b)


@pytest.fixture
def nonsym_system():
    """4x4 well-conditioned nonsymmetric system, ||A|| < 1."""
    rng = philox(21)
    A = np.eye(4) + 0.2 * rng.standard_normal((4, 4))
    A = 0.9 * A / np.linalg.norm(A, 2)
    b = rng.standard_normal(4)
    return A, b / np.linalg.norm(b)
