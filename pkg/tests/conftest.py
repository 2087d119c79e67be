import numpy as np
import pytest

from cavitymodes import BasisSpec, ModelParams, as_density


@pytest.fixture
def reference_params():
    return ModelParams(delta_c=-390.0, u0=-390.0, ut=-22.0, kappa=31.25, k_max=32, n_max=10)


@pytest.fixture
def small_params():
    # reduced truncation used for oracle comparisons
    return ModelParams(delta_c=-390.0, u0=-390.0, ut=-22.0, kappa=31.25, k_max=8, n_max=3)


@pytest.fixture
def tiny_params():
    return ModelParams(delta_c=-390.0, u0=-390.0, ut=-22.0, kappa=31.25, k_max=2, n_max=1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_density(basis: BasisSpec, rng, rank: int = 4, kind: str = "full"):
    """Random mixed state: convex combination of random pure states."""
    dim = {"full": basis.dim, "atom": basis.dim_k, "field": basis.dim_n}[kind]
    weights = rng.random(rank)
    weights /= weights.sum()
    m = np.zeros((dim, dim), dtype=complex)
    for w in weights:
        psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        psi /= np.linalg.norm(psi)
        m += w * np.outer(psi, psi.conj())
    return as_density(m, kind, basis if kind == "full" else None)
