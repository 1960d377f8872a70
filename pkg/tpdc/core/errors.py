"""
Exception hierarchy shared by the numerical core and the command line.
"""


class TpdcError(Exception):
    """Base class for every error raised by tpdc."""


class DomainError(TpdcError, ValueError):
    """An argument lies outside the domain of the operation."""


class PoleError(DomainError):
    """A function was evaluated at one of its poles."""


class ConvergenceError(TpdcError, ArithmeticError):
    """A series or iteration did not reach tolerance within its cap."""


class SingularEntryError(TpdcError, ArithmeticError):
    """A matrix entry has a non-integrable integrand."""


class NotPositiveDefinite(TpdcError, ArithmeticError):
    """Cholesky factorization of the overlap matrix failed."""


class SelectionRuleError(TpdcError, ValueError):
    """Parity or triangle selection rule forbids the requested element."""


class ResonanceError(TpdcError, ArithmeticError):
    """An energy denominator of the second-order sum is (nearly) zero."""


class SpectrumError(TpdcError):
    """The solved spectrum violates a classification invariant."""


class ConfigError(TpdcError, ValueError):
    """Invalid run configuration (bad key, value or file)."""


class SpuriousStateWarning(RuntimeWarning):
    """A kappa > 0 spectrum contains an intruder below the lowest bound state."""
