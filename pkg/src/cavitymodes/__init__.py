"""Quantum-trajectory simulator for a transversally pumped atom in a lossy
cavity, with coherent-mixture fitting of the field state and odd/even/
residual atomic mode decomposition."""

from .analysis import (
    FieldMoments,
    PositionGrid,
    build_grid,
    chi_profile,
    correlation_chi,
    field_moments,
    mandel_q,
    negativity,
    partial_transpose_atom,
    photon_distribution,
    position_density,
    position_representation,
    reduce_atom,
    reduce_field,
)
from .decompose import (
    CavityFit,
    ModeDecomposition,
    cavity_fit_error,
    cavity_fit_matrix,
    coherent_amplitudes,
    decompose_density,
    distribution_fit_error,
    extract_modes,
    fit_coherent_amplitude,
    mode_weight_series,
    reconstruct,
)
from .density import DensityMatrix, as_density, trace_distance, validate_density
from .model import (
    BasisSpec,
    ModelParams,
    adiabatic_field,
    adiabatic_photon_number,
    build_basis,
    build_h_eff,
    build_h_nh,
    jump_operator,
    op_field,
    op_sin,
    op_sin2,
    parity_operator,
)
from .oracle import (
    LiouvillianSpec,
    build_liouvillian,
    integrate_master_equation,
    liouvillian_apply,
    steady_state_direct,
)
from .trajectory import (
    EvolutionSchedule,
    TrajectoryRecord,
    batched_mean_stderr,
    ensemble_density,
    jump_probability,
    run_trajectories,
    run_trajectory,
    steady_state_density,
    step,
)

__version__ = "0.1.0"
