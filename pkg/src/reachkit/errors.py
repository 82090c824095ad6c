"""Exception and warning types shared across the package."""


class ReachkitError(Exception):
    """Base class for all errors raised by this package."""


class DimMismatch(ReachkitError):
    """Operands have incompatible ambient dimensions."""


class InfeasibleFace(ReachkitError):
    """Face constraint system has no solution."""


class DegenerateNormal(ReachkitError):
    """A normal vector vanished where a nonzero one is required."""


class EmptyPolyhedron(ReachkitError):
    """Polyhedron is empty where a nonempty one is required."""


class Unbounded2D(ReachkitError):
    """Vertex enumeration was asked for an unbounded 2D polyhedron."""


class Empty2D(ReachkitError):
    """Vertex enumeration was asked for an empty 2D polyhedron."""


class TooFewPoints(ReachkitError):
    """Hull construction needs at least three points."""


class NumericRange(ReachkitError):
    """A numeric computation left the representable/trustworthy range."""


class NonFiniteState(ReachkitError):
    """Integration produced a NaN or infinite state."""


class UnboundedFace(ReachkitError):
    """Norm maximization was asked over an unbounded face."""


class ExpressionError(ReachkitError):
    """Expression string does not conform to the supported grammar."""


class GradientUndefined(ReachkitError):
    """Gradient is NaN/inf or vanishes at a boundary sample."""


class EmptyBoundary(ReachkitError):
    """Boundary sampling produced no usable samples."""


class StepTooCoarse(ReachkitError):
    """A front sample moved more than two cells in one substep."""


class PreconditionViolated(ReachkitError):
    """A documented procedure precondition does not hold."""


class AssumptionA2Violated(ReachkitError):
    """The outward-flow lower bound over a face is not positive.

    Carries ``delta``, the offending minimum of the directional derivative.
    """

    def __init__(self, delta, message=None):
        self.delta = float(delta)
        super().__init__(message or f"outward-flow minimum over the face is {delta:.6g} (needs > 0)")


class BadDeltaOrder(ReachkitError):
    """delta0 >= delta where delta0 < delta is required."""


class DenominatorAllDegenerate(ReachkitError):
    """Every sampled ratio denominator fell below the degeneracy cutoff."""


class DimUnsupported(ReachkitError):
    """Operation is only implemented for a specific ambient dimension."""


class ModelError(ReachkitError):
    """Model file failed schema validation or refers to missing data."""


class EmptyPolyhedronWarning(UserWarning):
    """Signal that a convention value was returned for an empty polyhedron."""
