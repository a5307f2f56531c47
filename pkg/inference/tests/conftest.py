import numpy as np
import pytest

from inference.services.linalg import build_q_basis, solve_lyapunov


def random_spd(rng, p, floor=0.5):
    a = rng.standard_normal((p, p))
    return a @ a.T / p + floor * np.eye(p)


def random_skew(rng, p, scale=1.0):
    upper = np.triu(rng.uniform(-scale, scale, (p, p)), k=1)
    return upper - upper.T


def random_stable(rng, p):
    """Dense matrix with entries in [-1, 1], shifted so the smallest real eigenvalue is 1."""
    a = rng.uniform(-1.0, 1.0, (p, p))
    shift = 1.0 - np.min(np.linalg.eigvals(a).real)
    return a + shift * np.eye(p)


def random_directed_laplacian(rng, p, density=0.4):
    """Zero row sums; a directed cycle keeps the graph strongly connected."""
    adjacency = np.where(rng.random((p, p)) < density, rng.uniform(0.2, 1.0, (p, p)), 0.0)
    for i in range(p):
        adjacency[i, (i + 1) % p] = rng.uniform(0.2, 1.0)
    np.fill_diagonal(adjacency, 0.0)
    return np.diag(adjacency.sum(axis=1)) - adjacency


def semidef_covariance(laplacian):
    """Q^T Sigma_bar Q with Sigma_bar the reduced Lyapunov solution of Q L Q^T."""
    q_basis = build_q_basis(laplacian.shape[0])
    sigma_bar = solve_lyapunov(q_basis @ laplacian @ q_basis.T)
    return q_basis.T @ sigma_bar @ q_basis


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_by_two_sigma():
    return np.array([[2.0, 1.0], [1.0, 1.0]])


@pytest.fixture
def two_by_two_laplacian():
    return np.array([[0.5, 0.0], [-1.5, 2.5]])


@pytest.fixture
def write_csv(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
