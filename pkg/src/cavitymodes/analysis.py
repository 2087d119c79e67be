"""Reduced states, spatial coherence, entanglement and photon statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import DensityMatrix, as_density, require_kind
from .exceptions import ConfigError, DegenerateFieldError

__all__ = [
    "PositionGrid",
    "build_grid",
    "reduce_atom",
    "reduce_field",
    "position_representation",
    "position_density",
    "momentum_representation",
    "correlation_chi",
    "chi_profile",
    "partial_transpose_atom",
    "negativity",
    "mandel_q",
    "photon_distribution",
    "field_moments",
    "FieldMoments",
]


@dataclass(frozen=True)
class PositionGrid:
    """Uniform grid over the two-site cell Kx in [0, 2 pi)."""

    n_x: int

    @property
    def kx(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_x) / self.n_x

    @property
    def d_kx(self) -> float:
        return 2.0 * np.pi / self.n_x


def build_grid(n_x: int, k_max: int) -> PositionGrid:
    """Grid with the Nyquist margin n_x >= 4 k_max enforced."""
    if n_x < 4 * k_max:
        raise ConfigError(f"n_x = {n_x} below the Nyquist margin 4*k_max = {4 * k_max}")
    return PositionGrid(n_x)


def _split(rho: DensityMatrix) -> np.ndarray:
    require_kind(rho, "full", "partial trace")
    b = rho.basis
    return rho.matrix.reshape(b.dim_k, b.dim_n, b.dim_k, b.dim_n)


def reduce_atom(rho: DensityMatrix) -> DensityMatrix:
    """Partial trace over the field: rho_at(k1, k2) = sum_n rho(k1 n, k2 n)."""
    m = np.einsum("anbn->ab", _split(rho))
    return as_density(m, "atom", validate=False)


def reduce_field(rho: DensityMatrix) -> DensityMatrix:
    """Partial trace over the atom: rho_cav(n1, n2) = sum_k rho(k n1, k n2)."""
    m = np.einsum("anam->nm", _split(rho))
    return as_density(m, "field", validate=False)


def _plane_waves(rho_at: DensityMatrix, grid: PositionGrid) -> np.ndarray:
    # F[j, k] = exp(i k Kx_j) with k the signed momentum index
    dim_k = rho_at.dim
    k = np.arange(-dim_k // 2, dim_k // 2)
    return np.exp(1j * np.outer(grid.kx, k))


def position_representation(rho_at: DensityMatrix, grid: PositionGrid) -> np.ndarray:
    """rho(x1, x2) = (1/2pi) sum_{k,k'} e^{i(k Kx1 - k' Kx2)} rho(k, k').

    Normalized so the diagonal integrates to 1 over the cell.
    """
    require_kind(rho_at, "atom", "position representation")
    f = _plane_waves(rho_at, grid)
    return f @ rho_at.matrix @ f.conj().T / (2.0 * np.pi)


def position_density(rho_at: DensityMatrix, grid: PositionGrid) -> np.ndarray:
    """Real-space probability density on the grid (diagonal of the above)."""
    require_kind(rho_at, "atom", "position density")
    f = _plane_waves(rho_at, grid)
    return np.einsum("jk,kl,jl->j", f, rho_at.matrix, f.conj()).real / (2.0 * np.pi)


def momentum_representation(rho_x: np.ndarray, dim_k: int, grid: PositionGrid) -> np.ndarray:
    """Inverse of position_representation (round-trip check)."""
    k = np.arange(-dim_k // 2, dim_k // 2)
    f = np.exp(1j * np.outer(grid.kx, k))
    return f.conj().T @ rho_x @ f * (2.0 * np.pi / grid.n_x**2)


def correlation_chi(rho_at: DensityMatrix, x: float, grid: PositionGrid) -> float:
    """Spatial correlation chi(x) = integral d(K xi) |rho(xi, xi + x)|.

    The offset point wraps around the periodic two-site cell; x is the
    dimensionless separation K*x.
    """
    require_kind(rho_at, "atom", "spatial correlation")
    f = _plane_waves(rho_at, grid)
    dim_k = rho_at.dim
    k = np.arange(-dim_k // 2, dim_k // 2)
    shifted = rho_at.matrix * np.exp(-1j * k * x)[None, :]
    diag = np.einsum("jk,kl,jl->j", f, shifted, f.conj()) / (2.0 * np.pi)
    return float(np.abs(diag).sum() * grid.d_kx)


def chi_profile(rho_at: DensityMatrix, grid: PositionGrid) -> np.ndarray:
    """chi evaluated at every grid separation; aligned with grid.kx."""
    return np.asarray([correlation_chi(rho_at, x, grid) for x in grid.kx])


def partial_transpose_atom(rho: DensityMatrix) -> np.ndarray:
    """Transpose on the atomic index only; Hermitian and trace preserving."""
    b = rho.basis
    pt = _split(rho).transpose(2, 1, 0, 3)
    return pt.reshape(b.dim, b.dim)


def negativity(rho: DensityMatrix, noise_floor: float = 1e-8) -> float:
    """Entanglement negativity: |sum of negative eigenvalues| of the partial
    transpose. Eigenvalues above -noise_floor are treated as numerical zero.
    """
    lam = np.linalg.eigvalsh(partial_transpose_atom(rho))
    return float(-lam[lam < -noise_floor].sum())


def photon_distribution(rho_cav: DensityMatrix) -> np.ndarray:
    """P(n) = rho_cav(n, n)."""
    require_kind(rho_cav, "field", "photon distribution")
    return rho_cav.matrix.diagonal().real.copy()


@dataclass(frozen=True)
class FieldMoments:
    a: complex
    a2: complex
    a4: complex
    n: float


def field_moments(rho_cav: DensityMatrix) -> FieldMoments:
    """<a>, <a^2>, <a^4> and <a^dag a> over the truncated Fock basis."""
    require_kind(rho_cav, "field", "field moments")
    dim_n = rho_cav.dim
    a = np.diag(np.sqrt(np.arange(1, dim_n)), 1).astype(complex)
    a2 = a @ a
    m = rho_cav.matrix
    return FieldMoments(
        a=complex(np.trace(m @ a)),
        a2=complex(np.trace(m @ a2)),
        a4=complex(np.trace(m @ (a2 @ a2))),
        n=float(np.trace(m @ (a.conj().T @ a)).real),
    )


def mandel_q(rho_cav: DensityMatrix, mean_tol: float = 1e-6) -> float:
    """Mandel Q = (Var(n) - <n>) / <n>; 0 for coherent light, -1 for Fock.

    Raises DegenerateFieldError when <n> <= mean_tol (vacuum: undefined).
    """
    require_kind(rho_cav, "field", "Mandel Q")
    p = photon_distribution(rho_cav)
    n = np.arange(p.size)
    mean = float(p @ n)
    if mean <= mean_tol:
        raise DegenerateFieldError(f"<n> = {mean:.3g} <= {mean_tol:.1e}: Mandel Q undefined")
    var = float(p @ (n - mean) ** 2)
    return (var - mean) / mean
