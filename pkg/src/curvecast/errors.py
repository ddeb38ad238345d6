"""Exception hierarchy shared across curvecast modules."""


class CurvecastError(Exception):
    """Base class for all library errors."""


class DomainError(CurvecastError, ValueError):
    """A point or cut lies outside the admissible domain."""


class InvalidKnotError(CurvecastError, ValueError):
    """Knot vector violates ordering, clamping or multiplicity rules."""


class InvalidNodesError(CurvecastError, ValueError):
    """Interpolation nodes are not pairwise distinct."""


class InvalidInputError(CurvecastError, ValueError):
    """Argument has the wrong shape or lives in the wrong space."""


class InvalidMatrixError(CurvecastError, ValueError):
    """Matrix is non-finite or fails a structural requirement."""


class InvalidVarianceError(CurvecastError, ValueError):
    """A variance parameter is not strictly positive."""


class UnderdeterminedFitError(CurvecastError):
    """Regression-spline design matrix is column-rank deficient."""


class DegenerateModelError(CurvecastError):
    """Estimated model has a retained component with nonpositive variance."""


class InfeasibleFoldError(CurvecastError):
    """A cross-validation fold cannot produce a finite band constant."""


class UnreliableEstimateError(CurvecastError):
    """Monte Carlo estimate rests on too few effective samples."""


class SchemaError(CurvecastError, ValueError):
    """Input data does not follow the expected layout."""


class NoDataError(CurvecastError, ValueError):
    """No usable rows remain after ingestion."""
