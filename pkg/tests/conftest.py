"""Shared fixtures for the krylov-query test suite."""
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from krylov_query.config import Config, reset_config

settings.register_profile(
    "krylov", deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture]
)
settings.load_profile("krylov")


@pytest.fixture(autouse=True)
def default_config(tmp_path, monkeypatch):
    """Every test sees the built-in defaults, never a user config file."""
    monkeypatch.delenv("KQ_CONFIG", raising=False)
    reset_config(Config(tmp_path / "absent-config.yaml"))
    yield
    reset_config()


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    X = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (X + X.conj().T)


def random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def degenerate_hermitian(rng: np.random.Generator, dim: int, distinct: int) -> np.ndarray:
    """Random unitary conjugate of a diagonal with only ``distinct`` eigenvalues."""
    levels = np.sort(rng.uniform(-2.0, 2.0, distinct))
    spectrum = levels[rng.integers(0, distinct, dim)]
    spectrum[:distinct] = levels
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    return (Q * spectrum) @ Q.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def pauli_x():
    return np.array([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def uniform_chain():
    """Tight-binding chain a_n = 0, b_n = 1 of length 64 as a dense matrix."""
    m = 64
    return np.diag(np.ones(m - 1), 1) + np.diag(np.ones(m - 1), -1)
