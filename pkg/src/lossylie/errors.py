"""Exception hierarchy.

Config problems and numerical failures are kept apart so the CLI can map
them onto distinct exit codes.
"""


class LossyLieError(Exception):
    """Base class for all package errors."""


class ConfigError(LossyLieError, ValueError):
    """Malformed or inconsistent user input."""


class NumericalError(LossyLieError, ArithmeticError):
    """A solver could not produce a trustworthy result."""


class IntegrationError(NumericalError):
    """Adaptive integration gave up before reaching the requested time."""

    def __init__(self, message, t_reached=None):
        super().__init__(message)
        self.t_reached = t_reached


class NonFiniteError(NumericalError):
    """NaN or Inf appeared in a propagated state."""


class ExceptionalPointError(NumericalError):
    """The effective Hamiltonian is (numerically) defective."""

    def __init__(self, message, ep_condition=None):
        super().__init__(message)
        self.ep_condition = ep_condition


class FactorizationSingularity(NumericalError):
    """The Gauss-type product factorization of the sl(2) propagator broke down."""

    def __init__(self, message, t_singular=None):
        super().__init__(message)
        self.t_singular = t_singular


class DecayedStateError(NumericalError):
    """Post-selection onto the top layer has (numerically) zero probability."""


class RankAmbiguityError(NumericalError):
    """A singular value sits too close to the rank cut to decide."""


class AlgebraNotClosedError(NumericalError):
    """A commutator left the span of the supplied basis."""
