"""Exception hierarchy shared across the package."""


class ReluInvError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ReluInvError):
    """Malformed or inconsistent user input (bad model file, dimension mismatch, empty feasible set)."""


class NumericalFailureError(ReluInvError):
    """A numerical routine exceeded its iteration budget or failed to converge."""


class NoDiscrepancyError(ReluInvError):
    """Requested a separating cut or discrepancy node for a point that is inside the region."""


class InfeasibleRegionError(ReluInvError):
    """A region-restricted subproblem has an empty feasible set."""


class BoundaryCapError(ReluInvError):
    """Too many boundary neurons to enumerate activation assignments."""


class UndefinedMetricError(ReluInvError):
    """Percent-gap-closed is undefined because the initial value does not exceed the best known."""
