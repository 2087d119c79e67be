"""Self-check suite behind the `validate` subcommand.

Each check returns a CheckResult; the suite never raises on a failed
physics check, it reports. Guard violations (step size, truncation leakage)
are caught and turned into failing results with their diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .config import RunConfig
from .decompose import cavity_fit_error, extract_modes, fit_coherent_amplitude, reconstruct
from .density import pure_density, trace_distance
from .exceptions import CavityModesError, StepSizeError
from .model import (
    adiabatic_field,
    adiabatic_photon_number,
    build_basis,
    build_h_eff,
    build_h_nh,
    op_field,
    parity_operator,
)
from .oracle import build_liouvillian, integrate_master_equation, liouvillian_apply, steady_state_direct
from .synthetic import mixture_state
from .trajectory import (
    EvolutionSchedule,
    ensemble_density,
    initial_state,
    run_trajectories,
    run_trajectory,
)
from .analysis import reduce_field


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": float(self.value),
            "threshold": float(self.threshold),
            "detail": self.detail,
        }


def _basis_roundtrip(cfg: RunConfig) -> CheckResult:
    basis = build_basis(cfg.params)
    bad = sum(1 for i in range(basis.dim) if basis.index(*basis.label(i)) != i)
    return CheckResult("basis_index_bijection", bad == 0, float(bad), 0.0)


def _h_eff_hermitian(cfg: RunConfig) -> CheckResult:
    h = build_h_eff(cfg.params)
    dev = float(abs(h - h.conj().T).max())
    return CheckResult("h_eff_hermitian", dev <= 1e-12, dev, 1e-12)


def _h_nh_decay_part(cfg: RunConfig) -> CheckResult:
    basis = build_basis(cfg.params)
    diff = build_h_nh(cfg.params, basis) - build_h_eff(cfg.params, basis)
    dev = float(abs(diff + 1j * cfg.params.kappa * op_field(basis, "number")).max())
    return CheckResult("h_nh_antihermitian_is_decay", dev <= 1e-12, dev, 1e-12)


def _parity(cfg: RunConfig) -> CheckResult:
    basis = build_basis(cfg.params)
    h = build_h_eff(cfg.params, basis)
    s = parity_operator(basis)
    dev = float(abs(s @ h @ s.conj().T - h).max())
    return CheckResult("parity_symmetry_exact", dev <= 1e-12, dev, 1e-12)


def _bandedness(cfg: RunConfig) -> CheckResult:
    basis = build_basis(cfg.params)
    h = build_h_nh(cfg.params, basis).tocoo()
    viol = 0
    for r, c in zip(h.row, h.col):
        k1, n1 = basis.label(int(r))
        k2, n2 = basis.label(int(c))
        if abs(k1 - k2) > 2 or abs(n1 - n2) > 1:
            viol += 1
    return CheckResult("operator_bandedness", viol == 0, float(viol), 0.0)


def _kernel_vs_csr(cfg: RunConfig) -> CheckResult:
    basis = build_basis(cfg.params)
    diag_g, band_g, pump_g = kernels.drift_coefficients(cfg.params, basis)
    rng = np.random.default_rng(0)
    psi = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
    out = np.empty_like(psi)
    kernels.apply_drift(psi, out, diag_g, band_g, pump_g, basis.dim_k, basis.dim_n)
    ref = -1j * (build_h_nh(cfg.params, basis) @ psi)
    dev = float(np.abs(out - ref).max() / np.abs(ref).max())
    return CheckResult("kernel_matches_csr_operators", dev <= 1e-12, dev, 1e-12)


def _adiabatic(cfg: RunConfig) -> CheckResult:
    xs = np.linspace(0.0, 2.0 * np.pi, 37)
    a = adiabatic_field(xs, cfg.params)
    dev = float(np.abs(np.abs(a) ** 2 - adiabatic_photon_number(xs, cfg.params)).max())
    odd_dev = abs(adiabatic_field(np.pi / 2, cfg.params) + adiabatic_field(3 * np.pi / 2, cfg.params))
    dev = max(dev, float(odd_dev))
    return CheckResult("adiabatic_field_consistency", dev <= 1e-12, dev, 1e-12)


def _short_run(cfg: RunConfig):
    schedule = EvolutionSchedule(
        dt=cfg.dt,
        horizon=min(cfg.steady_horizon, 5.0),
        t_rel=0.0,
        sample_every=max(cfg.dt, 0.05),
        n_traj=1,
        master_seed=cfg.master_seed,
        integrator=cfg.integrator,
        p_c_limit=cfg.p_c_limit,
        edge_threshold=cfg.edge_threshold,
        nmax_threshold=cfg.nmax_threshold,
    )
    return run_trajectory(cfg.params, schedule, cfg.master_seed, enforce_guards=False)


def _stepping_checks(cfg: RunConfig) -> list:
    try:
        record = _short_run(cfg)
    except StepSizeError as exc:
        bad = CheckResult("step_size_guard", False, float(exc.p_c or np.nan), cfg.p_c_limit,
                          f"aborted: {exc}")
        skipped = [
            CheckResult(name, False, float("nan"), thr, "skipped: step-size guard tripped")
            for name, thr in (
                ("norm_preservation", 1e-10),
                ("truncation_edge_leakage", cfg.edge_threshold),
                ("fock_ceiling", cfg.nmax_threshold),
            )
        ]
        return [bad] + skipped
    norm_dev = record.diagnostics["max_norm_dev"]
    edge = record.diagnostics["max_edge_pop"]
    nmax = record.diagnostics["max_nmax_pop"]
    return [
        CheckResult("step_size_guard", True, 0.0, cfg.p_c_limit, "no violation"),
        CheckResult("norm_preservation", norm_dev < 1e-10, norm_dev, 1e-10),
        CheckResult("truncation_edge_leakage", edge < cfg.edge_threshold, edge,
                    cfg.edge_threshold),
        CheckResult("fock_ceiling", nmax < cfg.nmax_threshold, nmax, cfg.nmax_threshold),
    ]


def _determinism(cfg: RunConfig) -> CheckResult:
    schedule = EvolutionSchedule(
        dt=cfg.dt, horizon=1.0, t_rel=0.0, sample_every=max(cfg.dt, 0.1),
        store_states=True, master_seed=cfg.master_seed, integrator=cfg.integrator,
        p_c_limit=cfg.p_c_limit, edge_threshold=1.0,
    )
    try:
        a = run_trajectory(cfg.params, schedule, cfg.master_seed, enforce_guards=False)
        b = run_trajectory(cfg.params, schedule, cfg.master_seed, enforce_guards=False)
    except CavityModesError as exc:
        return CheckResult("fixed_seed_determinism", False, float("nan"), 0.0,
                           f"skipped: {exc}")
    same = np.array_equal(a.stored_states, b.stored_states) and np.array_equal(
        a.jump_times, b.jump_times
    )
    return CheckResult("fixed_seed_determinism", same, 0.0 if same else 1.0, 0.0)


def _oracle_checks(cfg: RunConfig) -> list:
    params = cfg.oracle_params
    spec = build_liouvillian(params)
    rng = np.random.default_rng(1)
    psi = rng.standard_normal(spec.dim) + 1j * rng.standard_normal(spec.dim)
    psi /= np.linalg.norm(psi)
    rho = np.outer(psi, psi.conj())
    tr_dev = float(abs(np.trace(liouvillian_apply(rho, spec))))
    results = [CheckResult("oracle_trace_free", tr_dev < 1e-12, tr_dev, 1e-12)]

    checkpoints = tuple(cfg.oracle_checkpoints)
    rho0 = pure_density(initial_state(spec.basis), spec.basis)
    exact = dict(
        integrate_master_equation(spec, rho0, horizon=max(checkpoints), sample_times=checkpoints)
    )
    schedule = EvolutionSchedule(
        dt=cfg.dt, horizon=max(checkpoints), t_rel=0.0,
        sample_every=max(cfg.dt, min(checkpoints) / 10.0), store_times=checkpoints,
        n_traj=cfg.oracle_n_traj, master_seed=cfg.master_seed,
        integrator=cfg.integrator, p_c_limit=cfg.p_c_limit, edge_threshold=1.0,
    )
    records = run_trajectories(params, schedule, workers=cfg.workers, enforce_guards=False)
    worst = 0.0
    for t in checkpoints:
        worst = max(worst, trace_distance(ensemble_density(records, t), exact[t]))
    results.append(
        CheckResult("mcwf_vs_master_equation", worst < cfg.oracle_trace_tol, worst,
                    cfg.oracle_trace_tol, f"N = {cfg.oracle_n_traj}, worst checkpoint")
    )

    ss = steady_state_direct(spec, tol=1e-3, t_cap=150.0)
    a_mean = abs((op_field(spec.basis, "annihilate") @ ss.rho.matrix).diagonal().sum())
    n_mean = (op_field(spec.basis, "number") @ ss.rho.matrix).diagonal().sum().real
    results.append(CheckResult("oracle_steady_parity", a_mean < 1e-6 and n_mean > 0.0,
                               float(a_mean), 1e-6, f"<n> = {n_mean:.4g}"))
    return results


def _decomposition_roundtrip(cfg: RunConfig) -> list:
    basis = build_basis(replace(cfg.oracle_params, n_max=max(10, cfg.oracle_n_max)))
    alpha, eps = 1.2, 0.3
    rho = mixture_state(basis, alpha, eps)
    fit = fit_coherent_amplitude(reduce_field(rho))
    fit_dev = max(abs(fit.alpha - alpha), abs(fit.epsilon - eps))
    dec = extract_modes(rho, fit.alpha, fit.epsilon)
    rebuilt = reconstruct(dec, basis)
    rt_dev = trace_distance(rebuilt, rho)
    exact_err = cavity_fit_error(reduce_field(rho), alpha, eps)
    return [
        CheckResult("mixture_fit_recovery", fit_dev < 1e-3, float(fit_dev), 1e-3),
        CheckResult("decomposition_round_trip", rt_dev < 2e-3, float(rt_dev), 2e-3),
        CheckResult("fit_error_at_exact_parameters", exact_err < 1e-12, float(exact_err), 1e-12),
    ]


def run_validation(cfg: RunConfig) -> list:
    checks = [
        _basis_roundtrip,
        _h_eff_hermitian,
        _h_nh_decay_part,
        _parity,
        _bandedness,
        _kernel_vs_csr,
        _adiabatic,
    ]
    results = []
    for check in checks:
        results.append(check(cfg))
    results.extend(_stepping_checks(cfg))
    results.append(_determinism(cfg))
    try:
        results.extend(_oracle_checks(cfg))
    except CavityModesError as exc:
        results.append(CheckResult("oracle_suite", False, float("nan"), 0.0, str(exc)))
    results.extend(_decomposition_roundtrip(cfg))
    return results
