"""
Exception hierarchy of the AS-G1 toolkit.

Every error carries the CLI exit status it maps to, so the command-line layer
translates library failures in one place.
"""
from typing import Optional


class Asg1Error(Exception):
    """Base class of all toolkit errors."""

    exit_code = 1


class InvalidArgumentError(Asg1Error, ValueError):
    """An argument is outside its admissible set."""


class DomainError(Asg1Error, ValueError):
    """A parameter value lies outside the unit interval / square."""


class GeometryFormatError(Asg1Error):
    """A geometry file cannot be parsed or is inconsistent with its space record."""


class AdmissibilityError(Asg1Error):
    """The target spline space violates a (p, r, k) bound."""

    exit_code = 2

    def __init__(self, message: str, bound: str = ""):
        super().__init__(message)
        self.bound = bound


class TopologyError(Asg1Error):
    """The patch complex is not a valid conforming, orientable multi-patch."""

    exit_code = 3

    def __init__(self, message: str, entity: Optional[str] = None):
        super().__init__(message)
        self.entity = entity


class ConformityError(TopologyError):
    """Control points along an interface do not match."""

    def __init__(self, message: str, entity: Optional[str] = None, gap: float = 0.0):
        super().__init__(message, entity)
        self.gap = gap


class RegularityError(Asg1Error):
    """Vanishing Jacobian (cross product or determinant) at a probe point."""

    exit_code = 3

    def __init__(self, message: str, patch: Optional[int] = None, corner=None):
        super().__init__(message)
        self.patch = patch
        self.corner = corner


class InfeasibleConstraintsError(Asg1Error):
    """Equality constraints of a stage have no solution."""

    exit_code = 4

    def __init__(self, message: str, residual: float = float('nan'), entity: Optional[str] = None):
        super().__init__(message)
        self.residual = residual
        self.entity = entity


class DegenerateSystemError(Asg1Error):
    """A normal-equation or KKT block is numerically singular."""

    exit_code = 4

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.stage = stage


class CheckFailedError(Asg1Error):
    """An AS-G1 residual exceeds the requested tolerance."""

    exit_code = 5

    def __init__(self, message: str, interface: Optional[int] = None, residual: float = float('nan')):
        super().__init__(message)
        self.interface = interface
        self.residual = residual


class NotAnalysisSuitableError(CheckFailedError):
    """The C1 space is refused because the geometry is not AS-G1."""


class ProblemMismatchError(Asg1Error):
    """Problem kind does not fit the surface topology."""

    exit_code = 6
