"""Exception types shared across the package.

Every error raised on a user-facing code path derives from ``WdroError`` so
callers can catch one base class.  Input-validation failures raise the most
specific subclass available; plain ``ValueError`` is reserved for programming
mistakes inside the package itself.
"""

from __future__ import annotations


class WdroError(Exception):
    """Base class for all package errors."""


class MalformedProgram(WdroError):
    """A linear program failed structural validation (NaN entries,
    mismatched shapes, lower bound above upper bound, unknown relation)."""


class NumericalBreakdown(WdroError):
    """The simplex engine could not continue: every admissible pivot falls
    below the pivot tolerance even after the Bland fallback, or the hard
    iteration cap was reached."""


class EmptySupport(WdroError):
    """The support polytope contains no points."""


class UnboundedPolyhedron(WdroError):
    """Vertex enumeration was asked for a polyhedron with a nonzero
    recession cone."""


class TooLarge(WdroError):
    """A combinatorial routine would exceed its configured size cap."""


class NormUnsupported(WdroError):
    """A ground norm other than the 1-norm or the max-norm was requested."""


class DimensionMismatch(WdroError):
    """Arrays that must share a dimension do not."""


class HypothesisViolated(WdroError):
    """A structural precondition of a reformulation does not hold, e.g. a
    halfspace that never meets the support, or an empty target set."""


class RecourseSetUnbounded(WdroError):
    """The second-stage feasible set {y : Wy >= h} is empty or unbounded,
    so the two-stage loss is not finite-valued."""


class DualPolytopeUnbounded(WdroError):
    """The dual feasible set {theta >= 0 : W'theta = q} is unbounded, so it
    cannot be described by its vertices."""


class SampleOutsideSupport(WdroError):
    """A data point violates the support constraints by more than the
    membership tolerance."""


class SlopeTooLarge(WdroError):
    """A candidate test function is not 1-Lipschitz for the ground norm."""


class EscapingMassPresent(WdroError):
    """Ball membership was requested for a worst-case description whose
    optimum is only attained asymptotically.  The exception carries the
    transport cost of the retained (finite) part in ``retained_cost``."""

    def __init__(self, message: str, retained_cost: float | None = None):
        super().__init__(message)
        self.retained_cost = retained_cost


class InvalidBeta(WdroError):
    """Confidence parameter outside (0, 1)."""


class GridEmpty(WdroError):
    """A calibration routine received an empty candidate grid."""


class DatasetTooSmall(WdroError):
    """Too few samples to split into the requested parts."""


class NoCoveringRadius(WdroError):
    """No candidate radius satisfies the calibration acceptance rule."""


class SupportNotFullSpace(WdroError):
    """A closed-form shortcut only valid for unconstrained support was
    invoked with a constrained support polytope."""


class SpecFileError(WdroError):
    """A problem-specification file failed validation.  ``field`` names the
    offending JSON path when known."""

    def __init__(self, message: str, field: str | None = None):
        prefix = f"{field}: " if field else ""
        super().__init__(prefix + message)
        self.field = field
