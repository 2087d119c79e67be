"""Constructed states with known decompositions, for validation.

These build density operators of the exact mixture form (localized odd/even
gratings coupled to +-alpha, a uniform residual on the vacuum), so fits and
mode extraction can be checked against known inputs.
"""

from __future__ import annotations

import numpy as np

from .decompose import coherent_amplitudes
from .density import DensityMatrix, as_density
from .model import BasisSpec

__all__ = ["localized_atomic_mode", "uniform_atomic_mode", "mixture_state", "bell_like_state"]


def localized_atomic_mode(dim_k: int, center_kx: float, sigma_k: float = 3.0) -> np.ndarray:
    """Momentum amplitudes of a wave packet peaked at Kx = center_kx.

    A Gaussian momentum envelope with the position-shift phase e^{-i k x0};
    periodic in the two-site cell by construction.
    """
    k = np.arange(-dim_k // 2, dim_k // 2)
    amps = np.exp(-(k.astype(float) ** 2) / (2.0 * sigma_k**2)) * np.exp(-1j * k * center_kx)
    return amps / np.linalg.norm(amps)


def uniform_atomic_mode(dim_k: int) -> np.ndarray:
    """Zero-momentum plane wave: spatially uniform density."""
    amps = np.zeros(dim_k, dtype=complex)
    amps[dim_k // 2] = 1.0
    return amps


def mixture_state(
    basis: BasisSpec,
    alpha: complex,
    epsilon: float,
    odd: np.ndarray | None = None,
    even: np.ndarray | None = None,
    residual: np.ndarray | None = None,
    sigma_k: float = 3.0,
) -> DensityMatrix:
    """Exact-form mixture over the product basis.

    Defaults: odd mode localized at Kx = pi/2, even at 3 pi/2 (its
    half-wavelength translate), residual uniform. Atomic arguments may be
    amplitude vectors (pure modes) or density matrices.
    """
    if odd is None:
        odd = localized_atomic_mode(basis.dim_k, np.pi / 2.0, sigma_k)
    if even is None:
        even = localized_atomic_mode(basis.dim_k, 3.0 * np.pi / 2.0, sigma_k)
    if residual is None:
        residual = uniform_atomic_mode(basis.dim_k)

    def as_matrix(x):
        x = np.asarray(x, dtype=complex)
        return np.outer(x, x.conj()) if x.ndim == 1 else x

    plus = coherent_amplitudes(alpha, basis.n_max)
    minus = coherent_amplitudes(-alpha, basis.n_max)
    vac = coherent_amplitudes(0.0, basis.n_max)
    m = (
        epsilon * np.kron(as_matrix(odd), np.outer(plus, plus.conj()))
        + epsilon * np.kron(as_matrix(even), np.outer(minus, minus.conj()))
        + (1.0 - 2.0 * epsilon) * np.kron(as_matrix(residual), np.outer(vac, vac.conj()))
    )
    return as_density(m, "full", basis, validate=False)


def bell_like_state(basis: BasisSpec, alpha: complex) -> np.ndarray:
    """Normalized |odd>|alpha> + |even>|-alpha> over the product basis."""
    odd = localized_atomic_mode(basis.dim_k, np.pi / 2.0)
    even = localized_atomic_mode(basis.dim_k, 3.0 * np.pi / 2.0)
    psi = np.kron(odd, coherent_amplitudes(alpha, basis.n_max)) + np.kron(
        even, coherent_amplitudes(-alpha, basis.n_max)
    )
    return psi / np.linalg.norm(psi)
