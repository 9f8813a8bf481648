"""Exception hierarchy shared across the package.

ValueError subclasses signal bad user input (CLI exit code 2); NumericalError
subclasses signal a failed computation on valid input (CLI exit code 3).
"""


class ConfigError(ValueError):
    """Invalid configuration: unknown key, bad value, malformed file."""


class NumericalError(RuntimeError):
    """A numerical routine failed on otherwise valid input."""


class ConvergenceError(NumericalError):
    """An iterative routine did not reach its tolerance."""


class InvariantViolation(NumericalError):
    """A computed object violates a structural invariant beyond tolerance."""
