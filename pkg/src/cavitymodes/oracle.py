"""Direct master-equation integration at reduced Hilbert-space dimensions.

Exact (up to time discretization) reference for validating the stochastic
engine: d rho / dt = -i [H, rho] + J rho J^dag - (1/2){J^dag J, rho} with
J = sqrt(2 kappa) a, integrated with fixed-step RK4 on the dense rho. The
generator is applied through sparse-operator times dense-matrix products; no
superoperator is ever formed. A size guard keeps this to small truncations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import DensityMatrix, as_density, hermiticity_defect
from .exceptions import TractabilityError
from .model import BasisSpec, ModelParams, build_basis, build_h_eff, jump_operator

MAX_VECTORIZED_ENTRIES = 10**6  # dim^2 guard for the dense rho

__all__ = [
    "LiouvillianSpec",
    "build_liouvillian",
    "liouvillian_apply",
    "integrate_master_equation",
    "SteadyStateResult",
    "steady_state_direct",
]


@dataclass(frozen=True)
class LiouvillianSpec:
    params: ModelParams
    basis: BasisSpec
    h_eff: object  # csr
    jump: object  # csr, sqrt(2 kappa) a
    jdag_j: object  # csr, J^dag J = 2 kappa n

    @property
    def dim(self) -> int:
        return self.basis.dim


def build_liouvillian(params: ModelParams) -> LiouvillianSpec:
    basis = build_basis(params)
    if basis.dim**2 > MAX_VECTORIZED_ENTRIES:
        raise TractabilityError(
            f"dim^2 = {basis.dim**2} exceeds {MAX_VECTORIZED_ENTRIES}; "
            "direct integration is for reduced truncations only"
        )
    jump = jump_operator(params, basis)
    return LiouvillianSpec(
        params=params,
        basis=basis,
        h_eff=build_h_eff(params, basis),
        jump=jump,
        jdag_j=(jump.conj().T @ jump).tocsr(),
    )


def liouvillian_apply(rho: np.ndarray, spec: LiouvillianSpec) -> np.ndarray:
    """d rho / dt in recoil-time units.

    Right multiplications are evaluated through transposed sparse products,
    e.g. rho H = (H^T rho^T)^T, so rho stays dense throughout.
    """
    if rho.shape != (spec.dim, spec.dim):
        raise TractabilityError(f"rho shape {rho.shape} does not match dim {spec.dim}")
    h, j, m = spec.h_eff, spec.jump, spec.jdag_j
    comm = h @ rho - (h.T @ rho.T).T
    j_rho = j @ rho
    sandwich = (j @ j_rho.conj().T).conj().T  # (J rho) J^dag
    anti = m @ rho + (m.T @ rho.T).T
    return -1j * comm + sandwich - 0.5 * anti


def _rk4_step(rho: np.ndarray, spec: LiouvillianSpec, dt: float) -> np.ndarray:
    k1 = liouvillian_apply(rho, spec)
    k2 = liouvillian_apply(rho + 0.5 * dt * k1, spec)
    k3 = liouvillian_apply(rho + 0.5 * dt * k2, spec)
    k4 = liouvillian_apply(rho + dt * k3, spec)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def default_dt(spec: LiouvillianSpec) -> float:
    """Step resolving the fastest scale: dt * max|H entries| < 0.1 (kappa*t units)."""
    h_max = float(np.abs(spec.h_eff.data).max()) if spec.h_eff.nnz else 1.0
    return 0.09 * spec.params.kappa / h_max


def integrate_master_equation(
    spec: LiouvillianSpec,
    rho0: DensityMatrix,
    horizon: float,
    dt: float | None = None,
    sample_times=None,
    drift_tol: float = 1e-6,
):
    """Integrate rho0 to kappa*t = horizon; returns [(kappa_t, DensityMatrix)].

    dt is the kappa*t step (defaults to default_dt). Every returned sample is
    re-validated: trace or hermiticity drift beyond drift_tol per unit
    kappa*t (plus a 1e-9 floor) aborts the run.
    """
    if dt is None:
        dt = default_dt(spec)
    if sample_times is None:
        sample_times = [horizon]
    sample_times = sorted(set(float(t) for t in sample_times))
    if sample_times[0] < 0.0 or sample_times[-1] > horizon + 1e-12:
        raise TractabilityError(f"sample times must lie in [0, {horizon}]")

    rho = rho0.matrix.astype(np.complex128, copy=True)
    out = []

    def _check_and_emit(t: float):
        budget = 1e-9 + drift_tol * max(t, 0.0)
        tr_dev = abs(np.trace(rho) - 1.0)
        h_dev = hermiticity_defect(rho)
        if tr_dev > budget or h_dev > budget:
            raise TractabilityError(
                f"integration drift at kappa*t = {t:.4g}: trace dev {tr_dev:.3e}, "
                f"hermiticity dev {h_dev:.3e} exceed budget {budget:.3e}"
            )
        out.append((t, as_density(rho.copy(), "full", spec.basis, hermitize=True,
                                  trace_normalize=True)))

    # integrate exact segments between requested times so samples land on them
    t_prev = 0.0
    if sample_times and sample_times[0] == 0.0:
        _check_and_emit(0.0)
        sample_times = sample_times[1:]
    for t_next in sample_times:
        span = t_next - t_prev
        if span > 0.0:
            n = max(1, int(np.ceil(span / dt)))
            dt_phys = (span / n) / spec.params.kappa
            for _ in range(n):
                rho = _rk4_step(rho, spec, dt_phys)
        _check_and_emit(t_next)
        t_prev = t_next
    return out


@dataclass(frozen=True)
class SteadyStateResult:
    rho: DensityMatrix
    converged: bool
    residual: float
    t_reached: float


def steady_state_direct(
    spec: LiouvillianSpec,
    rho0: DensityMatrix | None = None,
    tol: float = 1e-8,
    t_cap: float = 200.0,
    check_every: float = 1.0,
    dt: float | None = None,
) -> SteadyStateResult:
    """Integrate until max-entry |d rho / d(kappa t)| < tol or kappa*t hits t_cap.

    Returns the final state with a convergence flag and the residual, so a
    non-converged run is reported rather than silently accepted.
    """
    if rho0 is None:
        psi = np.zeros(spec.dim, dtype=np.complex128)
        psi[spec.basis.index(0, 0)] = 1.0
        rho0 = as_density(np.outer(psi, psi.conj()), "full", spec.basis)
    if dt is None:
        dt = default_dt(spec)
    steps_per_check = max(1, int(round(check_every / dt)))
    dt_phys = dt / spec.params.kappa

    rho = rho0.matrix.astype(np.complex128, copy=True)
    t = 0.0
    residual = float(np.abs(liouvillian_apply(rho, spec)).max() / spec.params.kappa)
    while residual >= tol and t < t_cap:
        for _ in range(steps_per_check):
            rho = _rk4_step(rho, spec, dt_phys)
        t += steps_per_check * dt
        residual = float(np.abs(liouvillian_apply(rho, spec)).max() / spec.params.kappa)
    return SteadyStateResult(
        rho=as_density(rho, "full", spec.basis, hermitize=True, trace_normalize=True),
        converged=bool(residual < tol),
        residual=residual,
        t_reached=t,
    )
