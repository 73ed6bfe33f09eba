"""Exception types shared across the package."""


class BohmgravError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(BohmgravError, ValueError):
    """Invalid configuration. Carries the full list of violations."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class QuadratureError(BohmgravError, ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, achieved_error=None, value=None):
        super().__init__(message)
        self.achieved_error = achieved_error
        self.value = value


class PhaseConsistencyError(BohmgravError, ArithmeticError):
    """The two equal-spin branch phases disagree beyond tolerance."""


class InvalidStateError(BohmgravError, ValueError):
    """Spin state violates normalization or produced a non-real expectation."""


class NodeProximityError(BohmgravError, RuntimeError):
    """Guiding velocity undefined: |psi| at the trajectory below threshold.

    Carries the last valid (wave, trajectory, step) so a run can be resumed
    or inspected.
    """

    def __init__(self, message, wave=None, trajectory=None, step=None):
        super().__init__(message)
        self.wave = wave
        self.trajectory = trajectory
        self.step = step


class OutOfDomainError(BohmgravError, RuntimeError):
    """A trajectory left the grid box."""


class DegenerateWindowError(BohmgravError, ArithmeticError):
    """Windowed source normalization N_j fell below threshold (density void)."""


class NumericalDegeneracyError(BohmgravError, ArithmeticError):
    """Eigen-decomposition produced negative weight beyond tolerance."""


class UntunableError(BohmgravError, ValueError):
    """Phase target cannot be reached by scaling the coupling."""
