"""Density matrices over the product, atomic-momentum and field bases."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import BasisMismatchError, DensityInvariantError
from .model import BasisSpec

HERMITICITY_TOL = 1e-9
TRACE_TOL = 1e-9
EIGENVALUE_FLOOR = -1e-8

KINDS = ("full", "atom", "field")


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian trace-one matrix tagged with the basis it lives on.

    kind is "full" (momentum x Fock product basis, carries a BasisSpec),
    "atom" (momentum factor only) or "field" (Fock factor only).
    """

    matrix: np.ndarray
    kind: str = "full"
    basis: BasisSpec | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BasisMismatchError(f"unknown basis tag {self.kind!r}")
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DensityInvariantError(f"density matrix must be square, got {m.shape}")
        if self.kind == "full":
            if self.basis is None:
                raise BasisMismatchError("full-basis density matrix requires a BasisSpec")
            if m.shape[0] != self.basis.dim:
                raise BasisMismatchError(
                    f"matrix dimension {m.shape[0]} != basis dimension {self.basis.dim}"
                )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def require_kind(rho: DensityMatrix, kind: str, what: str) -> None:
    if rho.kind != kind:
        raise BasisMismatchError(f"{what} needs a {kind!r}-basis density matrix, got {rho.kind!r}")


def hermiticity_defect(matrix: np.ndarray) -> float:
    """Max entrywise |M - M^dag|."""
    return float(np.abs(matrix - matrix.conj().T).max())


def validate_density(
    rho: DensityMatrix,
    hermiticity_tol: float = HERMITICITY_TOL,
    trace_tol: float = TRACE_TOL,
    eigenvalue_floor: float = EIGENVALUE_FLOOR,
) -> None:
    """Raise DensityInvariantError unless rho is Hermitian, unit trace and
    positive semidefinite within the stated tolerances."""
    m = rho.matrix
    dev = hermiticity_defect(m)
    if dev > hermiticity_tol:
        raise DensityInvariantError(f"hermiticity defect {dev:.3e} > {hermiticity_tol:.1e}")
    tr = np.trace(m)
    if abs(tr - 1.0) > trace_tol:
        raise DensityInvariantError(f"trace {tr} deviates from 1 beyond {trace_tol:.1e}")
    lo = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())
    if lo < eigenvalue_floor:
        raise DensityInvariantError(f"minimum eigenvalue {lo:.3e} < {eigenvalue_floor:.1e}")


def as_density(
    matrix: np.ndarray,
    kind: str = "full",
    basis: BasisSpec | None = None,
    hermitize: bool = False,
    trace_normalize: bool = False,
    validate: bool = True,
) -> DensityMatrix:
    m = np.asarray(matrix, dtype=complex)
    if hermitize:
        m = 0.5 * (m + m.conj().T)
    if trace_normalize:
        m = m / np.trace(m).real
    rho = DensityMatrix(m, kind, basis)
    if validate:
        validate_density(rho)
    return rho


def pure_density(psi: np.ndarray, basis: BasisSpec) -> DensityMatrix:
    return DensityMatrix(np.outer(psi, psi.conj()), "full", basis)


def trace_distance(a: DensityMatrix | np.ndarray, b: DensityMatrix | np.ndarray) -> float:
    """(1/2) ||a - b||_1 for Hermitian a, b."""
    ma = a.matrix if isinstance(a, DensityMatrix) else np.asarray(a)
    mb = b.matrix if isinstance(b, DensityMatrix) else np.asarray(b)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(ma - mb)).sum())


def density_to_dict(rho: DensityMatrix) -> dict:
    """JSON-ready form: {dim, kind, entries as row-major [re, im] pairs}."""
    flat = rho.matrix.ravel()
    out = {
        "dim": rho.dim,
        "kind": rho.kind,
        "entries": [[float(z.real), float(z.imag)] for z in flat],
    }
    if rho.basis is not None:
        out["k_max"] = rho.basis.k_max
        out["n_max"] = rho.basis.n_max
    return out


def density_from_dict(data: dict) -> DensityMatrix:
    dim = int(data["dim"])
    entries = np.asarray(data["entries"], dtype=float)
    if entries.shape != (dim * dim, 2):
        raise DensityInvariantError(
            f"expected {dim * dim} [re, im] pairs, got shape {entries.shape}"
        )
    m = (entries[:, 0] + 1j * entries[:, 1]).reshape(dim, dim)
    kind = data.get("kind", "full")
    basis = None
    if kind == "full":
        basis = BasisSpec(k_max=int(data["k_max"]), n_max=int(data["n_max"]))
    return as_density(m, kind, basis, validate=False)
