"""Exception hierarchy shared by all plasmon_lab modules."""


class PlasmonLabError(Exception):
    """Base class for library errors."""


class DomainError(PlasmonLabError, ValueError):
    """Argument outside the domain where the requested quantity is defined."""


class UnsupportedModeError(PlasmonLabError):
    """Evaluation mode not available for this marginal (e.g. continuation of a non-analytic profile)."""


class WrongRegimeError(PlasmonLabError):
    """Formula requested outside its regime (compact vs. unbounded support, k vs. threshold)."""


class NoRootError(PlasmonLabError):
    """Root finder failed to converge; ``trace`` holds the iterates."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class InconclusiveError(PlasmonLabError):
    """A certificate could not be decided at the current resolution."""


class ConfigError(PlasmonLabError, ValueError):
    """Invalid configuration file or command-line parameters."""
