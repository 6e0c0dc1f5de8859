"""Exception types shared across the package."""


class MatrixGamesError(Exception):
    """Base class for all package-specific errors."""


class TiesNotClassifiable(MatrixGamesError):
    """A player's four payoffs contain a tie; the ordinal topology is undefined."""


class NoEquilibrium(MatrixGamesError):
    """Game has neither a pure nor an interior mixed equilibrium."""


class InvalidSpec(MatrixGamesError):
    """Model specification is internally inconsistent or unparseable."""


class NoConvergence(MatrixGamesError):
    """Iterative solver exhausted its budget.

    Carries the last iterate and residual when available.
    """

    def __init__(self, message, last=None, residual=None):
        super().__init__(message)
        self.last = last
        self.residual = residual


class NonFinite(MatrixGamesError):
    """Objective or gradient evaluated to a non-finite value."""


class EmptyDataset(MatrixGamesError):
    """Operation requires at least one record."""


class InsufficientData(MatrixGamesError):
    """A cross-validation fold or split came out empty."""


class Divergence(MatrixGamesError):
    """Training loss became non-finite."""


class ParseError(MatrixGamesError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class RangeError(MatrixGamesError):
    """Field value outside its documented range."""


class UnknownGame(MatrixGamesError):
    """Trial references a game id that is not in the provided game list."""


class QuotaInfeasible(MatrixGamesError):
    """Game generation could not fill a requested type within its draw budget."""


class ZeroVariance(MatrixGamesError):
    """Correlation of a constant series is undefined."""
