"""Exception types shared across the package.

Each error carries a ``module`` tag so the CLI can report where a failure
originated.
"""


class TreewaveError(Exception):
    module = "treewave"


class ConfigurationError(TreewaveError, ValueError):
    """Invalid or unresolvable model / run parameters."""

    module = "config"


class DomainError(TreewaveError, ValueError):
    """An argument lies outside the domain of an operation."""


class RangeError(TreewaveError, IndexError):
    """A level or index lies outside the sampled / resolved range."""


class DefinitionError(TreewaveError, ArithmeticError):
    """A derived quantity is undefined for the given schedule."""

    module = "params"


class AmbiguityError(TreewaveError):
    """Inexact parameter brackets straddle a theorem case boundary."""

    module = "spectrum"

    def __init__(self, boundary, message=None):
        self.boundary = boundary
        super().__init__(message or f"parameter bracket straddles the boundary {boundary}")


class UndefinedExponentError(TreewaveError, ValueError):
    """The oscillating exponent is undefined at points of infinite regularity."""

    module = "analysis"


class UnknownEventError(TreewaveError, KeyError):
    module = "mc"
