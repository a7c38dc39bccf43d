"""
Exception hierarchy shared by the library and the command-line entry point.

Every exception carries the exit code the CLI reports when it escapes a
subcommand.
"""


class SimulationError(Exception):
    """Base class for every error raised by optics_percolation."""

    exit_code = 1


class ParameterError(SimulationError, ValueError):
    """Invalid parameter value or parameter combination."""

    exit_code = 2


class StructureError(ParameterError):
    """Malformed circuit, graph or matrix shape."""


class SupercriticalError(ParameterError):
    """Percolation bound requested outside its domain (eta * delta**2 >= 1)."""


class UnsupportedNoiseError(ParameterError):
    """Noise model combination that has no analysed threshold."""


class ResourceError(SimulationError, RuntimeError):
    """A configured size cap (outcomes, bond dimension, oracle size) was hit."""


class RestartLimitError(SimulationError, RuntimeError):
    """The sampler restarted far more often than its epsilon allows."""


class ThresholdRefusalError(SimulationError):
    """Sampling refused because the configuration is not classically simulable."""

    exit_code = 3


class BoundViolationError(SimulationError):
    """A computed Schmidt rank exceeded its analytic bound."""

    exit_code = 4


EXIT_OK = 0
EXIT_PARAMETER = ParameterError.exit_code
EXIT_REFUSED = ThresholdRefusalError.exit_code
EXIT_VERIFY_FAILED = 4
