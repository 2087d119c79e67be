"""Jitted inner loops for the stochastic wave-function evolution.

The Hamiltonian of this model is banded (|dk| <= 2, |dn| <= 1), so instead of
a generic sparse matvec the drift is applied with three strided passes over
the momentum-major state array: diagonal, the |dk| = 2 lattice band scaled by
the photon number, and the pump band coupling (k, n) <-> (k +- 1, n +- 1).
Coefficients are premultiplied by -i so a drift application returns
d psi / dt directly. Exact agreement with the CSR operators built by
`model` is enforced by tests.

All kernels are single threaded and allocation free; chunk orchestration,
random-number generation and sample post-processing live in `trajectory`.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# status codes returned by run_steps
OK = 0
PC_LIMIT = 1
ZERO_JUMP_NORM = 2

EULER = 0
RK4 = 1


def drift_coefficients(params, basis, include_decay: bool = True):
    """Strided-apply coefficient arrays for G = -i * H.

    Returns (diag_g, band_g, pump_g):
      diag_g[i]  over flat indices, includes -i*kappa*n when include_decay;
      band_g[n]  coefficient of the (k, n) <-> (k+-2, n) coupling;
      pump_g[n]  coefficient of the (k, n) -> (k+1, n+1) coupling; the three
                 Hermitian partners follow from it (see apply_drift).
    """
    n = basis.n_values.astype(np.float64)
    k = basis.k_values.astype(np.float64)
    diag_h = (
        -params.delta_c * n[None, :]
        + (k**2)[:, None]
        + params.u0 * 0.5 * n[None, :]
    ).astype(np.complex128)
    if include_decay:
        diag_h = diag_h - 1j * params.kappa * n[None, :]
    diag_g = np.ascontiguousarray((-1j * diag_h).ravel())
    band_g = -1j * (-params.u0 / 4.0) * n
    # H element (k+1, n+1) <- (k, n) is ut * (-i/2) * sqrt(n+1)
    pump_g = -1j * (-0.5j * params.ut) * np.sqrt(n + 1.0)
    return diag_g, band_g.astype(np.complex128), pump_g.astype(np.complex128)


@njit(cache=True, fastmath=True)
def apply_drift(psi, out, diag_g, band_g, pump_g, dim_k, dim_n):
    """out = -i H psi for the banded model Hamiltonian."""
    dim = dim_k * dim_n
    for i in range(dim):
        out[i] = diag_g[i] * psi[i]
    for kk in range(dim_k - 2):
        b, b2 = kk * dim_n, (kk + 2) * dim_n
        for n in range(1, dim_n):
            v = band_g[n]
            out[b + n] += v * psi[b2 + n]
            out[b2 + n] += v * psi[b + n]
    for kk in range(dim_k - 1):
        b, b2 = kk * dim_n, (kk + 1) * dim_n
        for n in range(dim_n - 1):
            a = pump_g[n]
            # G carries -i, so the Hermitian partner coefficient is -conj(a)
            out[b2 + n + 1] += a * psi[b + n]
            out[b + n] -= np.conj(a) * psi[b2 + n + 1]
            out[b2 + n] += a * psi[b + n + 1]
            out[b + n + 1] -= np.conj(a) * psi[b2 + n]


@njit(cache=True, fastmath=True)
def apply_annihilate(psi, out, sqrt_n, dim_k, dim_n):
    """out = a psi (bare annihilation, no sqrt(2 kappa) prefactor)."""
    for kk in range(dim_k):
        b = kk * dim_n
        for n in range(dim_n - 1):
            out[b + n] = sqrt_n[n + 1] * psi[b + n + 1]
        out[b + dim_n - 1] = 0.0


@njit(cache=True, fastmath=True)
def _photon_expectation(psi, n_flat):
    acc = 0.0
    for i in range(psi.shape[0]):
        acc += n_flat[i] * (psi[i].real ** 2 + psi[i].imag ** 2)
    return acc


@njit(cache=True, fastmath=True)
def _normalize(psi):
    nrm = 0.0
    for i in range(psi.shape[0]):
        nrm += psi[i].real ** 2 + psi[i].imag ** 2
    nrm = np.sqrt(nrm)
    if nrm > 0.0:
        inv = 1.0 / nrm
        for i in range(psi.shape[0]):
            psi[i] *= inv
    return nrm


@njit(cache=True, fastmath=True)
def run_steps(
    psi,
    diag_g,
    band_g,
    pump_g,
    n_flat,
    sqrt_n,
    dim_k,
    dim_n,
    dt,
    kappa,
    p_c_limit,
    integrator,
    uniforms,
    sample_offsets,
    sample_buf,
    jump_buf,
    k1,
    k2,
    k3,
    k4,
    tmp,
):
    """Advance psi in place through len(uniforms) MCWF steps.

    dt is the physical step (recoil-time units). The pre-step state is copied
    into sample_buf rows at the local step offsets listed in sample_offsets
    (strictly inside this chunk). Local step indices of jump events are
    written to jump_buf. Returns (status, n_samples, n_jumps, fail_step,
    fail_value); on a guard failure the state is left at the failing step.
    """
    dim = dim_k * dim_n
    n_steps = uniforms.shape[0]
    sp = 0
    nj = 0
    for s in range(n_steps):
        if sp < sample_offsets.shape[0] and sample_offsets[sp] == s:
            for i in range(dim):
                sample_buf[sp, i] = psi[i]
            sp += 1
        p_c = 2.0 * kappa * _photon_expectation(psi, n_flat) * dt
        if p_c >= p_c_limit:
            return PC_LIMIT, sp, nj, s, p_c
        if uniforms[s] < p_c:
            apply_annihilate(psi, tmp, sqrt_n, dim_k, dim_n)
            for i in range(dim):
                psi[i] = tmp[i]
            if _normalize(psi) == 0.0:
                return ZERO_JUMP_NORM, sp, nj, s, 0.0
            jump_buf[nj] = s
            nj += 1
            continue
        if integrator == EULER:
            apply_drift(psi, k1, diag_g, band_g, pump_g, dim_k, dim_n)
            for i in range(dim):
                psi[i] += dt * k1[i]
        else:
            apply_drift(psi, k1, diag_g, band_g, pump_g, dim_k, dim_n)
            for i in range(dim):
                tmp[i] = psi[i] + 0.5 * dt * k1[i]
            apply_drift(tmp, k2, diag_g, band_g, pump_g, dim_k, dim_n)
            for i in range(dim):
                tmp[i] = psi[i] + 0.5 * dt * k2[i]
            apply_drift(tmp, k3, diag_g, band_g, pump_g, dim_k, dim_n)
            for i in range(dim):
                tmp[i] = psi[i] + dt * k3[i]
            apply_drift(tmp, k4, diag_g, band_g, pump_g, dim_k, dim_n)
            sixth = dt / 6.0
            for i in range(dim):
                psi[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        _normalize(psi)
    return OK, sp, nj, -1, 0.0
