"""Semantic exception hierarchy.

Public functions raise these instead of bare ``ValueError`` so callers can
distinguish contract violations from solver trouble.
"""


class AndlabError(Exception):
    """Base error for this package."""


class ValidationError(AndlabError, ValueError):
    """Inputs violate a declared contract (domain, shape, unknown key)."""


class GeometryError(AndlabError):
    """Covering or region construction asked for infeasible geometry."""


class GridError(AndlabError):
    """Grid incompatible with the requested box or boundary condition."""


class SolverError(AndlabError):
    """An eigen- or linear solver failed to converge or broke down."""


class ScaleError(AndlabError):
    """A nested scale fell below what the grid can resolve."""
