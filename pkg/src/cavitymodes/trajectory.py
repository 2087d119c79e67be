"""Stochastic wave-function evolution and density-operator assembly.

A trajectory starts from |k=0, n=0> (vacuum field, atom at rest) and is
advanced in fixed steps. Each step draws one uniform random number; with
probability P_c = 2 kappa <a^dag a> dt a cavity photon is lost and the
annihilation operator is applied, otherwise the state evolves under the
non-Hermitian Hamiltonian H - i kappa n. States are renormalized exactly
after every step.

Times in schedules and records are dimensionless kappa*t; the physical step
passed to the integrator is dt_kappa / kappa (recoil-time units).

Steady state: the time average of |psi><psi| over the post-relaxation window,
accumulated in fixed-size chunks with compensated (Kahan) summation. Time
dependence: an equal-weight average over trajectories, reduced in seed order
so results are bit-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .density import DensityMatrix, as_density
from .exceptions import (
    ConfigError,
    JumpNormError,
    ScheduleMismatchError,
    StepSizeError,
    TruncationLeakageError,
)
from .model import BasisSpec, ModelParams, build_basis, edge_momentum_mask, jump_operator

CHUNK_STEPS = 65536  # fixed so accumulation order never depends on runtime knobs

__all__ = [
    "EvolutionSchedule",
    "TrajectoryRecord",
    "jump_probability",
    "step",
    "run_trajectory",
    "run_trajectories",
    "steady_state_density",
    "ensemble_density",
    "batched_mean_stderr",
]


@dataclass(frozen=True)
class EvolutionSchedule:
    """Run policy for the stochastic evolution (all times are kappa*t).

    dt            : step, kappa * delta_t
    horizon       : total evolution time kappa * T
    t_rel         : relaxation cutoff discarded from steady-state averages
    sample_every  : spacing of the diagnostic/expectation sample grid
    store_states  : keep the full state at every grid sample
    store_times   : extra grid times whose full states are kept
    n_traj        : trajectory count (seed list = master_seed + 0..n_traj-1
                    unless an explicit seed tuple is given)
    integrator    : "rk4" (default) or "euler" (first-order propagator)
    p_c_limit     : per-step jump-probability guard, aborts when exceeded
    accumulate_steady : accumulate outer products over the post-t_rel grid
    """

    dt: float = 5e-4
    horizon: float = 25000.0
    t_rel: float = 20.0
    sample_every: float = 0.05
    store_states: bool = False
    store_times: tuple = ()
    n_traj: int = 1
    master_seed: int = 7041
    seeds: tuple | None = None
    integrator: str = "rk4"
    p_c_limit: float = 0.01
    accumulate_steady: bool = False
    edge_threshold: float = 1e-6
    nmax_threshold: float = 1e-4

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.horizon < self.dt:
            raise ConfigError("horizon shorter than one step")
        if self.sample_every < self.dt:
            raise ConfigError("sample_every must be at least dt")
        if self.integrator not in ("rk4", "euler"):
            raise ConfigError(f"unknown integrator {self.integrator!r}")
        if not 0 < self.p_c_limit <= 0.1:
            raise ConfigError("p_c_limit must lie in (0, 0.1]")
        if self.n_traj < 1:
            raise ConfigError("n_traj must be >= 1")
        if self.accumulate_steady and self.t_rel >= self.horizon:
            raise ConfigError("t_rel must be below the horizon to accumulate a steady state")

    @property
    def seed_list(self) -> tuple:
        if self.seeds is not None:
            return tuple(int(s) for s in self.seeds)
        return tuple(int(self.master_seed) + i for i in range(self.n_traj))

    @property
    def total_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))

    @property
    def sample_stride(self) -> int:
        return max(1, int(round(self.sample_every / self.dt)))

    def grid_steps(self) -> np.ndarray:
        """Global step indices of the sample grid, including the endpoint."""
        return np.arange(0, self.total_steps + 1, self.sample_stride, dtype=np.int64)

    def store_steps(self) -> np.ndarray:
        """Grid steps whose full states are kept."""
        if self.store_states:
            return self.grid_steps()
        steps = []
        for t in self.store_times:
            s = int(round(t / self.dt))
            if abs(s * self.dt - t) > 0.5 * self.dt or not 0 <= s <= self.total_steps:
                raise ConfigError(f"store time {t} is not on the step grid")
            if s % self.sample_stride != 0:
                raise ConfigError(
                    f"store time {t} is not on the sample grid (every {self.sample_stride} steps)"
                )
            steps.append(s)
        return np.unique(np.asarray(steps, dtype=np.int64))


@dataclass
class TrajectoryRecord:
    """Everything one stochastic trajectory produced.

    times/n_expect/a_expect/norm_dev/edge_pop/nmax_pop are aligned with the
    sample grid. ss_sum holds the unnormalized sum of outer products over the
    post-t_rel window when steady-state accumulation was requested.
    """

    seed: int
    params: ModelParams
    schedule: EvolutionSchedule
    times: np.ndarray
    n_expect: np.ndarray
    a_expect: np.ndarray
    norm_dev: np.ndarray
    edge_pop: np.ndarray
    nmax_pop: np.ndarray
    jump_times: np.ndarray
    stored_times: np.ndarray
    stored_states: np.ndarray
    ss_sum: np.ndarray | None = None
    ss_count: int = 0
    ss_t_rel: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def basis(self) -> BasisSpec:
        return build_basis(self.params)

    def state_at(self, t: float) -> np.ndarray:
        idx = np.nonzero(np.isclose(self.stored_times, t, rtol=0, atol=1e-9))[0]
        if idx.size == 0:
            raise ScheduleMismatchError(f"kappa*t = {t} was not stored for this trajectory")
        return self.stored_states[idx[0]]


def jump_probability(psi: np.ndarray, params: ModelParams, dt: float) -> float:
    """P_c = 2 kappa <psi| a^dag a |psi> dt, with dt in recoil-time units."""
    basis = build_basis(params)
    n_flat = basis.n_of_index()
    return float(2.0 * params.kappa * (n_flat * (np.abs(psi) ** 2)).sum() * dt)


def step(
    psi: np.ndarray,
    h_nh: sp.spmatrix,
    params: ModelParams,
    dt: float,
    eps: float,
    integrator: str = "euler",
) -> np.ndarray:
    """One MCWF step (dt in recoil-time units, eps uniform on [0, 1)).

    eps < P_c applies the jump operator, otherwise the no-jump propagator:
    first order (1 - i dt H_nh) or classical RK4. Either branch ends with an
    exact renormalization, so the result has unit norm to rounding; for the
    first-order branch that equals the 1/sqrt(1 - P_c) rescaling up to
    O(dt^2) in the scalar only, the direction is identical.
    """
    p_c = jump_probability(psi, params, dt)
    if p_c >= 0.1:
        raise StepSizeError(f"P_c = {p_c:.3g} >= 0.1: dt violates the jump expansion", p_c=p_c)
    if eps < p_c:
        phi = jump_operator(params) @ psi
        norm = np.linalg.norm(phi)
        if norm == 0.0:
            raise JumpNormError("jump applied to a state with no photons")
        return phi / norm
    if integrator == "euler":
        phi = psi - 1j * dt * (h_nh @ psi)
    elif integrator == "rk4":
        k1 = -1j * (h_nh @ psi)
        k2 = -1j * (h_nh @ (psi + 0.5 * dt * k1))
        k3 = -1j * (h_nh @ (psi + 0.5 * dt * k2))
        k4 = -1j * (h_nh @ (psi + dt * k3))
        phi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        raise ConfigError(f"unknown integrator {integrator!r}")
    return phi / np.linalg.norm(phi)


def initial_state(basis: BasisSpec) -> np.ndarray:
    psi = np.zeros(basis.dim, dtype=np.complex128)
    psi[basis.index(0, 0)] = 1.0
    return psi


class _SampleProcessor:
    """Accumulates per-sample expectations, diagnostics, stored states and
    the optional steady-state outer-product sum, chunk by chunk."""

    def __init__(self, params: ModelParams, schedule: EvolutionSchedule, basis: BasisSpec):
        self.schedule = schedule
        self.basis = basis
        self.n_flat = basis.n_of_index().astype(np.float64)
        self.edge_mask = edge_momentum_mask(basis)
        self.sqrt_up = np.sqrt(np.arange(1, basis.dim_n, dtype=np.float64))
        self.store_set = set(schedule.store_steps().tolist())
        self.rel_steps = schedule.t_rel / schedule.dt  # accumulate strictly beyond this
        self.times, self.n_exp, self.a_exp = [], [], []
        self.norm_dev, self.edge, self.nmax = [], [], []
        self.stored = []
        if schedule.accumulate_steady:
            self.ss_sum = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
            self._ss_comp = np.zeros_like(self.ss_sum)
        else:
            self.ss_sum = None
        self.ss_count = 0

    def absorb(self, global_steps: np.ndarray, buf: np.ndarray) -> None:
        if global_steps.size == 0:
            return
        dk, dn = self.basis.dim_k, self.basis.dim_n
        b3 = buf.reshape(-1, dk, dn)
        prob = np.abs(buf) ** 2
        self.times.append(global_steps * self.schedule.dt)
        self.n_exp.append(prob @ self.n_flat)
        self.a_exp.append((b3[:, :, :-1].conj() * b3[:, :, 1:] * self.sqrt_up).sum(axis=(1, 2)))
        self.norm_dev.append(np.abs(np.sqrt(prob.sum(axis=1)) - 1.0))
        self.edge.append(prob[:, self.edge_mask].sum(axis=1))
        self.nmax.append(prob.reshape(-1, dk, dn)[:, :, -1].sum(axis=1))
        for row, s in enumerate(global_steps):
            if int(s) in self.store_set:
                self.stored.append((s * self.schedule.dt, buf[row].copy()))
        if self.ss_sum is not None:
            window = global_steps > self.rel_steps
            if window.any():
                block = buf[window]
                # Kahan-compensated add of this chunk's outer-product sum
                y = block.T @ block.conj() - self._ss_comp
                t = self.ss_sum + y
                self._ss_comp = (t - self.ss_sum) - y
                self.ss_sum = t
                self.ss_count += int(window.sum())

    def finish(self, seed: int, params: ModelParams, jump_steps: list) -> TrajectoryRecord:
        cat = lambda parts, dtype: (
            np.concatenate(parts) if parts else np.zeros(0, dtype=dtype)
        )
        stored_times = np.asarray([t for t, _ in self.stored])
        stored_states = (
            np.asarray([s for _, s in self.stored])
            if self.stored
            else np.zeros((0, self.basis.dim), dtype=np.complex128)
        )
        return TrajectoryRecord(
            seed=seed,
            params=params,
            schedule=self.schedule,
            times=cat(self.times, float),
            n_expect=cat(self.n_exp, float),
            a_expect=cat(self.a_exp, complex),
            norm_dev=cat(self.norm_dev, float),
            edge_pop=cat(self.edge, float),
            nmax_pop=cat(self.nmax, float),
            jump_times=(np.asarray(jump_steps, dtype=float) + 1.0) * self.schedule.dt,
            stored_times=stored_times,
            stored_states=stored_states,
            ss_sum=self.ss_sum,
            ss_count=self.ss_count,
            ss_t_rel=self.schedule.t_rel,
        )


def run_trajectory(
    params: ModelParams,
    schedule: EvolutionSchedule,
    seed: int,
    enforce_guards: bool = True,
) -> TrajectoryRecord:
    """Evolve one trajectory; deterministic for a fixed seed.

    With enforce_guards, truncation-edge leakage above schedule.edge_threshold
    aborts (StepSizeError and JumpNormError propagate regardless). Pass False
    to record the diagnostics instead, e.g. for validation reports.
    """
    basis = build_basis(params)
    diag_g, band_g, pump_g = kernels.drift_coefficients(params, basis)
    n_flat = basis.n_of_index().astype(np.float64)
    sqrt_n = np.sqrt(np.arange(basis.dim_n + 1, dtype=np.float64))
    dt_phys = schedule.dt / params.kappa
    integrator = kernels.RK4 if schedule.integrator == "rk4" else kernels.EULER

    psi = initial_state(basis)
    scratch = [np.empty(basis.dim, dtype=np.complex128) for _ in range(5)]
    rng = np.random.default_rng(seed)
    proc = _SampleProcessor(params, schedule, basis)
    grid = schedule.grid_steps()
    total = schedule.total_steps
    jump_steps: list = []
    jump_buf = np.empty(CHUNK_STEPS, dtype=np.int64)

    done = 0
    while done < total:
        n_steps = min(CHUNK_STEPS, total - done)
        uniforms = rng.random(n_steps)
        in_chunk = grid[(grid >= done) & (grid < done + n_steps)]
        offsets = (in_chunk - done).astype(np.int64)
        buf = np.empty((offsets.size, basis.dim), dtype=np.complex128)
        status, n_samples, n_jumps, fail_step, fail_val = kernels.run_steps(
            psi, diag_g, band_g, pump_g, n_flat, sqrt_n,
            basis.dim_k, basis.dim_n, dt_phys, params.kappa,
            schedule.p_c_limit, integrator, uniforms, offsets, buf, jump_buf,
            *scratch,
        )
        if status == kernels.PC_LIMIT:
            t_fail = (done + fail_step) * schedule.dt
            raise StepSizeError(
                f"P_c = {fail_val:.3g} >= {schedule.p_c_limit} at kappa*t = {t_fail:.4g}",
                kappa_t=t_fail,
                p_c=fail_val,
            )
        if status == kernels.ZERO_JUMP_NORM:
            t_fail = (done + fail_step) * schedule.dt
            raise JumpNormError(f"zero post-jump norm at kappa*t = {t_fail:.4g}")
        proc.absorb(in_chunk[:n_samples], buf[:n_samples])
        jump_steps.extend((jump_buf[:n_jumps] + done).tolist())
        if enforce_guards and proc.edge and proc.edge[-1].size:
            worst = proc.edge[-1].max()
            if worst > schedule.edge_threshold:
                at = proc.times[-1][proc.edge[-1].argmax()]
                raise TruncationLeakageError(
                    f"momentum-edge population {worst:.3e} > {schedule.edge_threshold:.1e} "
                    f"at kappa*t = {at:.4g}; increase k_max",
                    kappa_t=float(at),
                    population=float(worst),
                )
        done += n_steps

    if grid[-1] == total:  # endpoint state sits after the last step
        proc.absorb(np.asarray([total], dtype=np.int64), psi[None, :].copy())
    record = proc.finish(seed, params, jump_steps)
    record.diagnostics = {
        "max_norm_dev": float(record.norm_dev.max()) if record.norm_dev.size else 0.0,
        "max_edge_pop": float(record.edge_pop.max()) if record.edge_pop.size else 0.0,
        "max_nmax_pop": float(record.nmax_pop.max()) if record.nmax_pop.size else 0.0,
        "n_jumps": int(record.jump_times.size),
    }
    return record


def _run_one(args):
    params, schedule, seed, enforce = args
    return run_trajectory(params, schedule, seed, enforce)


def run_trajectories(
    params: ModelParams,
    schedule: EvolutionSchedule,
    workers: int = 1,
    enforce_guards: bool = True,
) -> list:
    """Run schedule.seed_list trajectories, optionally in parallel.

    Results are returned sorted by seed; they do not depend on workers.
    """
    seeds = schedule.seed_list
    jobs = [(params, schedule, s, enforce_guards) for s in seeds]
    if workers <= 1 or len(seeds) == 1:
        records = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs))
    return sorted(records, key=lambda r: r.seed)


def _ss_pieces(record: TrajectoryRecord, t_rel: float):
    if record.ss_sum is not None and record.ss_count > 0:
        if abs(record.ss_t_rel - t_rel) > 1e-9:
            raise ScheduleMismatchError(
                f"steady-state window starts at {record.ss_t_rel}, requested {t_rel}"
            )
        return record.ss_sum, record.ss_count
    keep = record.stored_times > t_rel
    if not keep.any():
        raise ConfigError(f"no samples beyond the relaxation cutoff kappa*t = {t_rel}")
    block = record.stored_states[keep]
    return block.T @ block.conj(), int(keep.sum())


def steady_state_density(records, t_rel: float | None = None) -> DensityMatrix:
    """Time average of |psi><psi| over samples with kappa*t > t_rel.

    Accepts one record or a sequence (merged in seed order); uses the
    in-run accumulator when present, stored states otherwise.
    """
    if isinstance(records, TrajectoryRecord):
        records = [records]
    records = sorted(records, key=lambda r: r.seed)
    if not records:
        raise ConfigError("no trajectory records given")
    if t_rel is None:
        t_rel = records[0].schedule.t_rel
    total = np.zeros((records[0].basis.dim, records[0].basis.dim), dtype=np.complex128)
    comp = np.zeros_like(total)
    count = 0
    for rec in records:
        piece, n = _ss_pieces(rec, t_rel)
        y = piece - comp
        t = total + y
        comp = (t - total) - y
        total = t
        count += n
    rho = total / count
    return as_density(rho, "full", records[0].basis, hermitize=True, trace_normalize=True)


def ensemble_density(records, t: float) -> DensityMatrix:
    """Equal-weight ensemble average (1/N) sum |psi_i(t)><psi_i(t)|.

    All records must share the schedule and parameters; t must be stored.
    The reduction stacks states in seed order and contracts once, so the
    result is bit-identical however the trajectories were executed.
    """
    records = sorted(records, key=lambda r: r.seed)
    if not records:
        raise ConfigError("no trajectory records given")
    ref = records[0]
    for rec in records[1:]:
        if rec.schedule != ref.schedule or rec.params != ref.params:
            raise ScheduleMismatchError("trajectories were run with different schedules")
    states = np.asarray([rec.state_at(t) for rec in records])
    rho = states.T @ states.conj() / len(records)
    return as_density(rho, "full", ref.basis, hermitize=True, trace_normalize=True)


def batched_mean_stderr(values: np.ndarray, n_batches: int = 16):
    """Mean and batch standard error of a (possibly complex) series.

    The series is split into n_batches contiguous blocks (discarding the
    oldest remainder); the standard error is estimated from the scatter of
    block means, which absorbs autocorrelation up to the block length.
    """
    values = np.asarray(values)
    if values.size < 2 * n_batches:
        n_batches = max(2, values.size // 2)
    block = values.size // n_batches
    trimmed = values[values.size - n_batches * block :]
    means = trimmed.reshape(n_batches, block).mean(axis=1)
    mean = means.mean()
    if np.iscomplexobj(values):
        var = means.real.var(ddof=1) + means.imag.var(ddof=1)
    else:
        var = means.var(ddof=1)
    return mean, float(np.sqrt(var / n_batches))
