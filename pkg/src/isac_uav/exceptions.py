"""Exception types raised across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class SingularityError(DomainError):
    """Geometry is degenerate (observer and target coincide)."""


class FilterDivergenceError(RuntimeError):
    """The EKF can no longer produce a meaningful estimate."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


class ConfigError(ValueError):
    """A scenario configuration failed validation.

    ``field`` names the offending key as ``section.key`` when known.
    """

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class ExperimentError(RuntimeError):
    """An experiment ran but its outputs failed a hard consistency check."""
