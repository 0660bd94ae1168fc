import numpy as np
import pytest
import scipy.linalg

import specfactors.io_utils as io_utils
import specfactors.spectral as spectral
from specfactors.matnum import ToleranceConfig
from specfactors.statespace import Realization

# fewer circle samples keep the randomized suites quick
FAST_TOLERANCES = ToleranceConfig(circle_samples=128)


def random_stable_matrix(
    rng: np.random.Generator,
    n: int,
    low: float = 0.2,
    high: float = 0.8,
    complex_pairs: int = 0,
) -> np.ndarray:
    """
    Diagonalizable real matrix with eigenvalues of modulus in [low, high]
    and a well-conditioned eigenvector matrix. The first complex_pairs
    2x2 diagonal blocks are scaled rotations, the rest is real.
    """
    assert 2 * complex_pairs <= n
    blocks = []
    for _ in range(complex_pairs):
        radius, angle = rng.uniform(max(low, 0.3), high), rng.uniform(0.4, np.pi - 0.4)
        blocks.append(radius * np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]))
    n_real = n - 2 * complex_pairs
    blocks.append(np.diag(rng.uniform(low, high, n_real) * rng.choice([-1.0, 1.0], n_real)))
    core = scipy.linalg.block_diag(*blocks)
    q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
    q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
    vectors = q1 @ np.diag(rng.uniform(1.0, 2.0, n)) @ q2
    return vectors @ core @ np.linalg.inv(vectors)


def random_outer_model(rng: np.random.Generator, n: int, complex_pairs: int = 0) -> Realization:
    """
    Minimal outer realization with D = I: A and Gamma = A - BC are drawn
    stable and C = B^{-1}(A - Gamma).
    """
    a = random_stable_matrix(rng, n, complex_pairs=complex_pairs)
    gamma = random_stable_matrix(rng, n, complex_pairs=complex_pairs)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    b = q @ np.diag(rng.uniform(0.5, 1.5, n))
    c = np.linalg.solve(b, a - gamma)
    return Realization(a=a, b=b, c=c, d=np.eye(n))


def make_w_minus() -> Realization:
    return Realization(
        a=0.5 * np.eye(2),
        b=np.eye(2),
        c=np.diag([1 / 4, 1 / 6]),
        d=np.eye(2),
    )


def make_w_bar_minus() -> Realization:
    return Realization(
        a=2 * np.eye(2),
        b=[[-4 / 5, 8 / 5], [-8 / 5, -4 / 5]],
        c=[[-7 / 8, -7 / 4], [5 / 3, -5 / 6]],
        d=2 * np.eye(2),
    )


@pytest.fixture
def w_minus() -> Realization:
    return make_w_minus()


@pytest.fixture
def w_bar_minus() -> Realization:
    return make_w_bar_minus()


@pytest.fixture(scope="session")
def example_cp() -> spectral.ConjugatePhase:
    return spectral.conjugate_phase(make_w_minus())


@pytest.fixture(scope="session")
def golden() -> dict:
    return io_utils.load_json(io_utils.get_path(io_utils.EXAMPLE_ASSET_PATH_DICT["golden"]))
