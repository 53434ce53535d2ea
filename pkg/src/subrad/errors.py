"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class SamplingError(RuntimeError):
    """Position sampling failed (cloud too dense for the exclusion radius)."""


class IntegrationError(RuntimeError):
    """Adaptive time stepping failed or a state invariant broke en route."""


class ConvergenceError(RuntimeError):
    """Iterative solver did not reach the requested residual."""


class NoPeakError(RuntimeError):
    """A series expected to contain a positive peak has none."""
