import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from core.likelihood import ReadCounts  # noqa: E402
from core.priors import sample_rho, sample_w  # noqa: E402
from simulate.generator import SimSpec, generate  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240617)


@pytest.fixture
def small_truth():
    """Two samples, six pairs, two subclones with well separated weights."""
    Z = np.array(
        [
            [4, 1],
            [4, 6],
            [1, 6],
            [2, 9],
            [10, 3],
            [1, 1],
        ]
    )
    spec = SimSpec(
        T=2,
        K=6,
        C=2,
        Z=Z,
        w=np.array([[0.02, 0.63, 0.35], [0.02, 0.28, 0.70]]),
        n_range=(300, 400),
        seed=7,
        name="small",
    )
    return generate(spec)


@pytest.fixture
def small_counts(small_truth):
    return small_truth[0]


@pytest.fixture
def random_parameters(rng):
    T, K, C = 3, 7, 4
    Z = rng.integers(0, 10, size=(K, C))
    w = sample_w(T, C, 0.5, 0.5, rng)
    rho = sample_rho(1.0, rng)
    n = rng.integers(0, 30, size=(T, K, 8)).astype(float)
    return ReadCounts(n), Z, w, rho
