"""Exception types raised across the package."""


class DomainError(ValueError):
    """A position lies outside the domain where the potential is finite."""


class CertificateError(ArithmeticError):
    """A certificate constant could not be computed (overflow, no root)."""


class StatisticsError(ValueError):
    """Not enough usable data for a Monte Carlo or fitting estimate."""


class CapabilityError(NotImplementedError):
    """The requested estimate is outside the supported problem sizes."""


class NumericsError(ArithmeticError):
    """An iterative numerical routine failed to converge."""


class SetupError(RuntimeError):
    """A sampler or simulation could not be initialised."""
