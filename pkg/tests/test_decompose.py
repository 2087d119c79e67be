import numpy as np
import pytest

from cavitymodes import (
    BasisSpec,
    as_density,
    build_grid,
    cavity_fit_error,
    cavity_fit_matrix,
    coherent_amplitudes,
    decompose_density,
    extract_modes,
    fit_coherent_amplitude,
    mode_weight_series,
    position_density,
    reconstruct,
    reduce_field,
    trace_distance,
)
from cavitymodes.density import pure_density, validate_density
from cavitymodes.exceptions import DecompositionUndefinedError, DegenerateFieldError
from cavitymodes.model import atomic_translation_signs, parity_operator
from cavitymodes.synthetic import localized_atomic_mode, mixture_state, uniform_atomic_mode
from cavitymodes.trajectory import initial_state


@pytest.fixture
def synth_basis():
    return BasisSpec(k_max=8, n_max=10)


def field_density(matrix):
    return as_density(matrix, "field", validate=False)


# ------------------------------------------------------------------ fitting


def test_fit_recovers_synthetic_parameters(synth_basis):
    rho = mixture_state(synth_basis, alpha=1.2, epsilon=0.3)
    fit = fit_coherent_amplitude(reduce_field(rho))
    assert fit.alpha == pytest.approx(1.2, abs=1e-3)
    assert fit.epsilon == pytest.approx(0.3, abs=1e-3)
    assert fit.clamp == 0.0


def test_fit_vacuum_is_degenerate(synth_basis):
    m = np.zeros((synth_basis.dim_n, synth_basis.dim_n), dtype=complex)
    m[0, 0] = 1.0
    with pytest.raises(DegenerateFieldError):
        fit_coherent_amplitude(field_density(m))


def test_fit_without_residual_component(synth_basis):
    rho = mixture_state(synth_basis, alpha=0.8, epsilon=0.5)
    fit = fit_coherent_amplitude(reduce_field(rho))
    assert fit.alpha == pytest.approx(0.8, abs=1e-3)
    assert fit.epsilon == pytest.approx(0.5, abs=1e-3)


def test_fit_imaginary_amplitude_convention(synth_basis):
    # principal root: Re >= 0, and Im >= 0 on the Re = 0 ridge
    rho = mixture_state(synth_basis, alpha=1.1j, epsilon=0.25)
    fit = fit_coherent_amplitude(reduce_field(rho))
    assert fit.alpha.imag == pytest.approx(1.1, abs=1e-3)
    assert abs(fit.alpha.real) < 1e-6


def test_fit_clamps_epsilon(synth_basis):
    # extra Fock |1><1| weight raises <n> without touching <a^2>, <a^4>
    alpha = 1.0
    plus = coherent_amplitudes(alpha, synth_basis.n_max)
    minus = coherent_amplitudes(-alpha, synth_basis.n_max)
    m = 0.45 * np.outer(plus, plus.conj()) + 0.45 * np.outer(minus, minus.conj())
    m[1, 1] += 0.1
    fit = fit_coherent_amplitude(field_density(m))
    assert fit.epsilon == 0.5
    assert fit.clamp > 0.0


def test_fit_error_zero_for_exact_fit(synth_basis):
    rho_cav = field_density(cavity_fit_matrix(1.2, 0.3, synth_basis.n_max))
    assert cavity_fit_error(rho_cav, 1.2, 0.3) <= 1e-12


def test_fit_error_positive_for_perturbed_input(synth_basis):
    m = cavity_fit_matrix(1.2, 0.3, synth_basis.n_max)
    m[1, 1] += 0.02
    m[0, 0] -= 0.02
    err = cavity_fit_error(field_density(m), 1.2, 0.3)
    assert err > 0.02


# --------------------------------------------------------------- extraction


def test_extraction_round_trip(synth_basis):
    alpha, eps = 1.2, 0.3
    odd = localized_atomic_mode(synth_basis.dim_k, np.pi / 2.0)
    even = localized_atomic_mode(synth_basis.dim_k, 3.0 * np.pi / 2.0)
    res = uniform_atomic_mode(synth_basis.dim_k)
    rho = mixture_state(synth_basis, alpha, eps, odd=odd, even=even, residual=res)
    dec = extract_modes(rho, alpha, eps)
    np.testing.assert_allclose(dec.rho_odd.matrix, np.outer(odd, odd.conj()), atol=1e-3)
    np.testing.assert_allclose(dec.rho_even.matrix, np.outer(even, even.conj()), atol=1e-3)
    np.testing.assert_allclose(dec.rho_residual.matrix, np.outer(res, res.conj()), atol=1e-3)
    assert dec.weights[0] == pytest.approx(eps, abs=1e-3)
    assert dec.weights[1] == pytest.approx(eps, abs=1e-3)
    assert dec.weights[2] == pytest.approx(1.0 - 2.0 * eps, abs=1e-3)
    assert dec.weight_mismatch < 1e-3
    rebuilt = reconstruct(dec, synth_basis)
    assert trace_distance(rebuilt, rho) < 1e-3


def test_extraction_without_residual(synth_basis):
    rho = mixture_state(synth_basis, alpha=0.8, epsilon=0.5)
    dec = extract_modes(rho, 0.8, 0.5)
    assert abs(dec.weights[2]) < 1e-3


def test_extraction_requires_amplitude(synth_basis):
    rho = mixture_state(synth_basis, alpha=1.0, epsilon=0.3)
    with pytest.raises(DecompositionUndefinedError):
        extract_modes(rho, 0.0, 0.3)


def test_extracted_modes_are_valid_densities(synth_basis):
    # at n_max = 10 the coherent-state tail (|c_10|^2 ~ 2.5e-6 for alpha=1.2)
    # bounds how negative the extracted-mode spectrum can dip
    rho = mixture_state(synth_basis, alpha=1.2, epsilon=0.3)
    dec = extract_modes(rho, 1.2, 0.3)
    for mode in (dec.rho_odd, dec.rho_even, dec.rho_residual):
        validate_density(mode, eigenvalue_floor=-1e-5)
    assert dec.hermiticity_defect < 1e-6


def test_extracted_mode_positivity_converges_with_truncation():
    # with the tail pushed out (n_max = 16) the modes meet the strict floor
    basis = BasisSpec(k_max=8, n_max=16)
    rho = mixture_state(basis, alpha=1.2, epsilon=0.3)
    dec = extract_modes(rho, 1.2, 0.3)
    for mode in (dec.rho_odd, dec.rho_even, dec.rho_residual):
        validate_density(mode, eigenvalue_floor=-1e-8)


def test_mode_positions(synth_basis):
    rho = mixture_state(synth_basis, alpha=1.2, epsilon=0.3)
    dec = extract_modes(rho, 1.2, 0.3)
    grid = build_grid(64, synth_basis.k_max)
    odd_density = position_density(dec.rho_odd, grid)
    even_density = position_density(dec.rho_even, grid)
    assert abs(grid.kx[np.argmax(odd_density)] - np.pi / 2.0) < 0.2
    assert abs(grid.kx[np.argmax(even_density)] - 3.0 * np.pi / 2.0) < 0.2


def test_mirror_symmetry_swaps_modes(synth_basis):
    # conjugating by the half-wavelength translation maps the odd mode onto
    # the translated even mode and vice versa
    alpha, eps = 1.2, 0.3
    rho = mixture_state(synth_basis, alpha, eps)
    signs = atomic_translation_signs(synth_basis.dim_k)
    s_full = parity_operator(synth_basis)
    flipped = as_density(
        (s_full @ rho.matrix @ s_full.conj().T).toarray()
        if hasattr(s_full @ rho.matrix, "toarray")
        else s_full @ rho.matrix @ s_full.conj().T,
        "full",
        synth_basis,
        validate=False,
    )
    dec = extract_modes(rho, alpha, eps)
    dec_flipped = extract_modes(flipped, alpha, eps)
    translated_even = signs[:, None] * dec.rho_even.matrix * signs[None, :]
    np.testing.assert_allclose(dec_flipped.rho_odd.matrix, translated_even, atol=1e-6)
    translated_odd = signs[:, None] * dec.rho_odd.matrix * signs[None, :]
    np.testing.assert_allclose(dec_flipped.rho_even.matrix, translated_odd, atol=1e-6)


def test_decompose_density_end_to_end(synth_basis):
    rho = mixture_state(synth_basis, alpha=1.2, epsilon=0.3)
    dec = decompose_density(rho)
    assert dec.alpha == pytest.approx(1.2, abs=1e-3)
    assert dec.epsilon == pytest.approx(0.3, abs=1e-3)
    # the fitted alpha carries the <a^4> truncation bias (~4e-4), which the
    # rebuilt fit inherits; at the generating parameters the error is ~1e-16
    assert dec.fit_error < 2e-3
    assert dec.fit_error_pn < 2e-3
    assert dec.fit_error_pn <= dec.fit_error + 1e-12  # diagonal part of the trace norm
    assert trace_distance(reconstruct(dec, synth_basis), rho) < 2e-3


# ------------------------------------------------------------- time series


def test_weight_series_vacuum_frame(synth_basis):
    psi = initial_state(synth_basis)
    frames = [(0.0, pure_density(psi, synth_basis)),
              (1.0, mixture_state(synth_basis, alpha=1.0, epsilon=0.2))]
    series = mode_weight_series(frames)
    assert series.epsilon[0] == 0.0
    assert series.residual_weight[0] == 1.0
    assert series.epsilon[1] == pytest.approx(0.2, abs=1e-3)
    assert len(series.notes) == 1


def test_weight_series_monotone_on_synthetic_ramp(synth_basis):
    eps_values = [0.05, 0.15, 0.3]
    frames = [(t, mixture_state(synth_basis, 1.0, e)) for t, e in enumerate(eps_values)]
    series = mode_weight_series(frames)
    assert np.all(np.diff(series.epsilon) > 0)
    np.testing.assert_allclose(series.epsilon + series.residual_weight + series.epsilon,
                               1.0, atol=1e-12)
