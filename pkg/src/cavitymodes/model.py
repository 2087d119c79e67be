"""Hilbert space, operators and Hamiltonians for a transversally pumped atom
in a lossy single-mode cavity.

Units: hbar = 1 and the atomic recoil frequency omega_r = 1, so the kinetic
energy of momentum state |k> is k**2. Lengths are measured in 1/K (K the
cavity wave number), all rates (delta_c, u0, ut, kappa) in omega_r, and times
are quoted as the dimensionless kappa*t.

The product basis is |k, n> with momentum index k in {-k_max, ..., k_max-1}
and photon number n in {0, ..., n_max}; the flat index is
(k + k_max) * (n_max + 1) + n, i.e. momentum-major.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigError

__all__ = [
    "ModelParams",
    "BasisSpec",
    "build_basis",
    "op_field",
    "op_sin",
    "op_sin2",
    "op_kinetic",
    "build_h_eff",
    "build_h_nh",
    "jump_operator",
    "parity_operator",
    "atomic_translation_signs",
    "adiabatic_field",
    "adiabatic_photon_number",
    "edge_momentum_mask",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the effective Hamiltonian plus truncations.

    delta_c : cavity detuning (omega_r units)
    u0      : effective atom-field coupling g^2/Delta_a
    ut      : effective transverse pump g*eta_t/Delta_a
    kappa   : cavity half decay rate (full photon loss rate is 2*kappa)
    k_max   : momentum truncation, k in {-k_max, ..., k_max-1}
    n_max   : Fock truncation, n in {0, ..., n_max}
    """

    delta_c: float = -390.0
    u0: float = -390.0
    ut: float = -38.0
    kappa: float = 31.25
    k_max: int = 32
    n_max: int = 10

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigError(f"kappa must be positive, got {self.kappa}")
        if self.k_max < 2:
            raise ConfigError(f"k_max must be >= 2, got {self.k_max}")
        if self.n_max < 1:
            raise ConfigError(f"n_max must be >= 1, got {self.n_max}")


@dataclass(frozen=True)
class BasisSpec:
    """Momentum (x) Fock product basis with the flat index bijection."""

    k_max: int
    n_max: int

    @property
    def dim_k(self) -> int:
        return 2 * self.k_max

    @property
    def dim_n(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return self.dim_k * self.dim_n

    @property
    def k_values(self) -> np.ndarray:
        return np.arange(-self.k_max, self.k_max)

    @property
    def n_values(self) -> np.ndarray:
        return np.arange(self.dim_n)

    def index(self, k: int, n: int) -> int:
        """Flat index of |k, n>."""
        if not (-self.k_max <= k < self.k_max):
            raise IndexError(f"momentum index {k} outside [-{self.k_max}, {self.k_max})")
        if not (0 <= n <= self.n_max):
            raise IndexError(f"Fock index {n} outside [0, {self.n_max}]")
        return (k + self.k_max) * self.dim_n + n

    def label(self, i: int) -> tuple[int, int]:
        """Inverse of index: flat index -> (k, n)."""
        if not (0 <= i < self.dim):
            raise IndexError(f"flat index {i} outside [0, {self.dim})")
        kk, n = divmod(i, self.dim_n)
        return kk - self.k_max, n

    def n_of_index(self) -> np.ndarray:
        """Photon number of every flat index, shape (dim,)."""
        return np.tile(self.n_values, self.dim_k)

    def k_of_index(self) -> np.ndarray:
        """Momentum of every flat index, shape (dim,)."""
        return np.repeat(self.k_values, self.dim_n)


def build_basis(params: ModelParams) -> BasisSpec:
    return BasisSpec(k_max=params.k_max, n_max=params.n_max)


def _fock_annihilate(dim_n: int) -> sp.csr_matrix:
    # a|n> = sqrt(n)|n-1>; a^dag|n_max> = 0 under hard truncation
    return sp.diags(np.sqrt(np.arange(1, dim_n)), offsets=1, format="csr", dtype=complex)


def op_field(basis: BasisSpec, kind: str) -> sp.csr_matrix:
    """Cavity field operator on the full product space.

    kind is one of "annihilate" (a), "create" (a^dag) or "number" (a^dag a);
    the momentum factor is the identity.
    """
    a = _fock_annihilate(basis.dim_n)
    if kind == "annihilate":
        op = a
    elif kind == "create":
        op = a.conj().T.tocsr()
    elif kind == "number":
        op = sp.diags(basis.n_values.astype(float), format="csr", dtype=complex)
    else:
        raise ValueError(f"unknown field operator kind {kind!r}")
    return sp.kron(sp.identity(basis.dim_k, dtype=complex), op, format="csr")


def _sin_momentum(dim_k: int) -> sp.csr_matrix:
    # sin(Kx)|k> = (|k+1> - |k-1>) / (2i); couplings leaving the truncated
    # range are dropped (momentum space is not periodic).
    # <k+1|sin|k> = -i/2 is the subdiagonal, <k|sin|k+1> = +i/2 the super.
    lower = np.full(dim_k - 1, -0.5j)
    return sp.diags([np.conj(lower), lower], offsets=[1, -1], format="csr", dtype=complex)


def _sin2_momentum(dim_k: int) -> sp.csr_matrix:
    # sin^2(Kx)|k> = |k>/2 - (|k+2> + |k-2>)/4
    off = np.full(dim_k - 2, -0.25)
    return sp.diags(
        [off, np.full(dim_k, 0.5), off], offsets=[2, 0, -2], format="csr", dtype=complex
    )


def op_sin(basis: BasisSpec) -> sp.csr_matrix:
    """sin(K x) on the full product space (identity on the Fock factor)."""
    return sp.kron(_sin_momentum(basis.dim_k), sp.identity(basis.dim_n, dtype=complex), format="csr")


def op_sin2(basis: BasisSpec) -> sp.csr_matrix:
    """sin^2(K x) on the full product space (identity on the Fock factor)."""
    return sp.kron(_sin2_momentum(basis.dim_k), sp.identity(basis.dim_n, dtype=complex), format="csr")


def op_kinetic(basis: BasisSpec) -> sp.csr_matrix:
    """p^2/(2 mu) in recoil units: diagonal k^2 on the momentum factor."""
    k2 = sp.diags((basis.k_values.astype(float)) ** 2, format="csr", dtype=complex)
    return sp.kron(k2, sp.identity(basis.dim_n, dtype=complex), format="csr")


def build_h_eff(params: ModelParams, basis: BasisSpec | None = None) -> sp.csr_matrix:
    """Effective Hamiltonian
    H = -delta_c n + k^2 + u0 sin^2(Kx) n + ut sin(Kx) (a^dag + a).

    Hermitian by construction; banded with |dk| <= 2 and |dn| <= 1.
    """
    if basis is None:
        basis = build_basis(params)
    number = op_field(basis, "number")
    a = op_field(basis, "annihilate")
    h = (
        -params.delta_c * number
        + op_kinetic(basis)
        + params.u0 * (op_sin2(basis) @ number)
        + params.ut * (op_sin(basis) @ (a + a.conj().T))
    )
    return h.tocsr()


def jump_operator(params: ModelParams, basis: BasisSpec | None = None) -> sp.csr_matrix:
    """Cavity decay jump operator J = sqrt(2 kappa) a."""
    if basis is None:
        basis = build_basis(params)
    return np.sqrt(2.0 * params.kappa) * op_field(basis, "annihilate")


def build_h_nh(params: ModelParams, basis: BasisSpec | None = None) -> sp.csr_matrix:
    """Non-Hermitian Hamiltonian H - (i/2) J^dag J = H - i kappa n."""
    if basis is None:
        basis = build_basis(params)
    return (build_h_eff(params, basis) - 1j * params.kappa * op_field(basis, "number")).tocsr()


def parity_operator(basis: BasisSpec) -> sp.csr_matrix:
    """Half-wavelength translation combined with the field sign flip.

    Diagonal with entries (-1)**(k+n); conjugation by it leaves H_eff
    invariant (sin(Kx) and a flip sign together).
    """
    signs = ((-1.0) ** (basis.k_of_index() + basis.n_of_index())).astype(complex)
    return sp.diags(signs, format="csr")


def atomic_translation_signs(dim_k: int) -> np.ndarray:
    """Signs (-1)**k of the half-wavelength translation on the momentum factor."""
    return (-1.0) ** np.arange(-dim_k // 2, dim_k // 2)


def adiabatic_field(kx: float | np.ndarray, params: ModelParams) -> complex | np.ndarray:
    """Field amplitude a(x) when the cavity follows the atom adiabatically.

    a(x) = i ut sin(Kx) / ( i[delta_c - u0 sin^2(Kx)] - kappa ); kx is the
    dimensionless coordinate K*x. The denominator never vanishes for kappa > 0.
    """
    s = np.sin(kx)
    return 1j * params.ut * s / (1j * (params.delta_c - params.u0 * s**2) - params.kappa)


def adiabatic_photon_number(kx: float | np.ndarray, params: ModelParams) -> float | np.ndarray:
    """|a(x)|^2 = ut^2 sin^2(Kx) / ([delta_c - u0 sin^2(Kx)]^2 + kappa^2)."""
    s2 = np.sin(kx) ** 2
    return params.ut**2 * s2 / ((params.delta_c - params.u0 * s2) ** 2 + params.kappa**2)


def edge_momentum_mask(basis: BasisSpec, margin: int = 2) -> np.ndarray:
    """Boolean mask over flat indices with |k| >= k_max - margin.

    Population on this band is the truncation-edge leakage diagnostic.
    """
    return np.abs(basis.k_of_index()) >= basis.k_max - margin
