"""Error types raised by the simulator."""


class CavityModesError(Exception):
    """Base class for all package errors."""


class ConfigError(CavityModesError):
    """Invalid parameters, schedule or run configuration."""


class StepSizeError(CavityModesError):
    """Per-step jump probability exceeded its guard; dt is too large."""

    def __init__(self, message, kappa_t=None, p_c=None):
        super().__init__(message)
        self.kappa_t = kappa_t
        self.p_c = p_c


class JumpNormError(CavityModesError):
    """Post-jump state had zero norm (jump applied to a dark state)."""


class TruncationLeakageError(CavityModesError):
    """Population reached the momentum truncation edge."""

    def __init__(self, message, kappa_t=None, population=None):
        super().__init__(message)
        self.kappa_t = kappa_t
        self.population = population


class BasisMismatchError(CavityModesError):
    """Operation received a density matrix over the wrong basis."""


class ScheduleMismatchError(CavityModesError):
    """Trajectories combined across incompatible schedules."""


class DensityInvariantError(CavityModesError):
    """Hermiticity, trace or positivity violated beyond tolerance."""


class DegenerateFieldError(CavityModesError):
    """Field too close to vacuum for the requested statistic or fit."""


class DecompositionUndefinedError(CavityModesError):
    """Mode extraction attempted with |alpha| below tolerance."""


class TractabilityError(CavityModesError):
    """Direct master-equation integration requested beyond the size guard."""
