"""Typed errors raised by the maxagree library."""


class MaxagreeError(Exception):
    """Base class for all library errors."""


class SingularCovariance(MaxagreeError):
    """Predictor covariance matrix is not positive definite."""


class TooFewRows(MaxagreeError):
    """Sample too small for the requested operation."""


class ZeroVariance(MaxagreeError):
    """A correlation was requested for a constant vector."""


class DegenerateInput(MaxagreeError):
    """Both inputs to an agreement measure are constant."""


class DimensionMismatch(MaxagreeError):
    """Inputs have incompatible shapes."""


class DegenerateAgreement(MaxagreeError):
    """Multiple correlation is (numerically) zero or outside the usable
    range, so agreement-maximizing quantities are undefined."""


class NumericalGradientFailure(MaxagreeError):
    """Finite-difference gradient produced non-finite entries."""


class ExcessiveResampleFailure(MaxagreeError):
    """More than the tolerated fraction of resampling replicates failed."""


class BCaDegenerate(MaxagreeError):
    """BCa interval is undefined (all replicates identical, or the
    acceleration denominator vanishes)."""


class TooManyPredictors(MaxagreeError):
    """Exhaustive subset search refused above the feasibility guard."""


class ParseError(MaxagreeError):
    """A CSV cell could not be parsed as a number.

    Carries the 1-based file line number and the offending column name.
    """

    def __init__(self, line: int, column: str, message: str = ""):
        self.line = line
        self.column = column
        super().__init__(message or f"line {line}, column {column!r}: not a number")


class ColumnNotFound(MaxagreeError):
    """A requested column name or index does not exist in the file."""


class ConfigError(MaxagreeError):
    """Invalid run configuration; `field` names the offending option."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
