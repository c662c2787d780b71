"""Exception types raised across the package."""


class GhdoError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(GhdoError, ValueError):
    """Invalid network or run configuration (bad width, empty layers, ...)."""


class InputError(GhdoError, ValueError):
    """Invalid caller-supplied data (bad configuration length, non-PSD matrix, ...)."""


class DegenerateAmplitudeError(GhdoError, ArithmeticError):
    """|rho(sigma, eta)| fell below the underflow threshold; skip the sample."""


class DegenerateBatchError(GhdoError, ArithmeticError):
    """A whole sample batch carries zero total weight; no estimate possible."""


class CapacityError(GhdoError, ValueError):
    """Dense-oracle operation requested beyond its supported system size."""


class NonUniqueSteadyStateError(GhdoError, RuntimeError):
    """The Liouvillian null space has dimension > 1 within tolerance."""


class CheckpointError(GhdoError, ValueError):
    """Unreadable or version-incompatible checkpoint file."""
