import numpy as np
import pytest

from cavitymodes import (
    ModelParams,
    build_basis,
    build_liouvillian,
    integrate_master_equation,
    liouvillian_apply,
    steady_state_direct,
    trace_distance,
)
from cavitymodes.density import pure_density
from cavitymodes.exceptions import TractabilityError
from cavitymodes.model import build_h_eff, jump_operator, op_field
from cavitymodes.trajectory import initial_state

from conftest import random_density


@pytest.fixture
def oracle_params():
    return ModelParams(delta_c=-390.0, u0=-390.0, ut=-22.0, kappa=31.25, k_max=4, n_max=2)


def vacuum_density(params):
    basis = build_basis(params)
    return pure_density(initial_state(basis), basis)


def test_generator_is_trace_free(oracle_params, rng):
    spec = build_liouvillian(oracle_params)
    rho = random_density(spec.basis, rng)
    drho = liouvillian_apply(rho.matrix, spec)
    assert abs(np.trace(drho)) < 1e-12


def test_generator_preserves_hermiticity(oracle_params, rng):
    spec = build_liouvillian(oracle_params)
    drho = liouvillian_apply(random_density(spec.basis, rng).matrix, spec)
    assert np.abs(drho - drho.conj().T).max() < 1e-12


def test_generator_matches_dense_reference(oracle_params, rng):
    # independent route: same Lindblad form assembled from dense matrices
    spec = build_liouvillian(oracle_params)
    rho = random_density(spec.basis, rng).matrix
    h = build_h_eff(oracle_params).toarray()
    j = jump_operator(oracle_params).toarray()
    expected = (
        -1j * (h @ rho - rho @ h)
        + j @ rho @ j.conj().T
        - 0.5 * (j.conj().T @ j @ rho + rho @ j.conj().T @ j)
    )
    np.testing.assert_allclose(liouvillian_apply(rho, spec), expected, atol=1e-12)


def test_vacuum_is_stationary_without_pump():
    params = ModelParams(ut=0.0, k_max=4, n_max=2)
    spec = build_liouvillian(params)
    drho = liouvillian_apply(vacuum_density(params).matrix, spec)
    assert np.abs(drho).max() == 0.0


def test_integration_keeps_dark_state_fixed():
    params = ModelParams(ut=0.0, k_max=4, n_max=2)
    spec = build_liouvillian(params)
    samples = integrate_master_equation(spec, vacuum_density(params), horizon=3.0,
                                        sample_times=[1.0, 3.0])
    for _, rho in samples:
        assert trace_distance(rho, vacuum_density(params)) < 1e-12


def test_step_halving_converges(oracle_params):
    spec = build_liouvillian(oracle_params)
    rho0 = vacuum_density(oracle_params)
    (_, coarse), = integrate_master_equation(spec, rho0, horizon=2.0, dt=0.004)
    (_, fine), = integrate_master_equation(spec, rho0, horizon=2.0, dt=0.002)
    assert trace_distance(coarse, fine) < 1e-6


def test_integration_drift_guard_trips_on_unstable_step(oracle_params):
    spec = build_liouvillian(oracle_params)
    with pytest.raises(TractabilityError):
        # far beyond the RK4 stability region for this generator
        integrate_master_equation(spec, vacuum_density(oracle_params), horizon=5.0, dt=0.5)


def test_tractability_guard():
    # dim = 2048, dim^2 = 4.2e6 exceeds the vectorized-rho bound
    with pytest.raises(TractabilityError):
        build_liouvillian(ModelParams(k_max=64, n_max=15))


def test_steady_state_dark_converges_immediately():
    params = ModelParams(ut=0.0, k_max=4, n_max=2)
    spec = build_liouvillian(params)
    result = steady_state_direct(spec)
    assert result.converged
    assert result.t_reached == 0.0
    assert trace_distance(result.rho, vacuum_density(params)) < 1e-12


def test_steady_state_parity_and_photons(oracle_params):
    # symmetric generator: <a> = 0 in the stationary state while <n> > 0
    spec = build_liouvillian(oracle_params)
    result = steady_state_direct(spec, tol=1e-3, t_cap=150.0)
    assert result.converged, f"residual {result.residual}"
    basis = spec.basis
    a = op_field(basis, "annihilate")
    n = op_field(basis, "number")
    a_mean = (a @ result.rho.matrix).diagonal().sum()
    n_mean = (n @ result.rho.matrix).diagonal().sum().real
    assert abs(a_mean) < 1e-6
    assert n_mean > 0.0


def test_steady_state_reports_nonconvergence(oracle_params):
    spec = build_liouvillian(oracle_params)
    result = steady_state_direct(spec, tol=1e-13, t_cap=2.0)
    assert not result.converged
    assert result.residual > 1e-13
