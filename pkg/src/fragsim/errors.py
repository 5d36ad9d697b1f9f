"""Exception hierarchy and warning categories."""


class FragsimError(Exception):
    """Base class for all package errors."""


class DomainError(FragsimError):
    """Argument outside the valid domain of an operation."""


class QuadratureFailure(FragsimError):
    """Adaptive quadrature could not reach the requested tolerance."""


class NonFinite(FragsimError):
    """An integral or limit constant failed to be finite."""


class NoRoot(FragsimError):
    """No Malthusian root: the Laplace exponent has no sign change on the bracket."""


class BudgetExceeded(FragsimError):
    """Event count exceeded the configured per-path cap."""


class IncompleteHorizon(FragsimError):
    """Query time or threshold lies beyond what the log was simulated to."""


class ConfigError(FragsimError):
    """Malformed experiment configuration (unknown key, wrong type, bad value)."""


class LatticeWarning(UserWarning):
    """Step distribution concentrates on a lattice; key-renewal limit not applicable."""
