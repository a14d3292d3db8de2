"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
contract: 1 = internal consistency / theorem-check failure (a bug),
2 = precondition or domain error, 3 = budget ran out before a conclusion.
"""
from __future__ import annotations


class PuzzleError(Exception):
    exit_code = 2


# -- domain / precondition errors (exit 2) ----------------------------------

class InMainComponent(PuzzleError):
    """Some fixed point is non-repelling; no dividing fixed point exists."""


class PortraitNotFound(PuzzleError):
    """No periodic ray cycle landed at a common fixed point within q_max."""


class OnRay(PuzzleError):
    """Angle coincides with a boundary ray angle."""


class OnBoundary(PuzzleError):
    """Point sits within tolerance of a puzzle-piece boundary."""


class OutsideTruncation(PuzzleError):
    """Point lies outside the equipotential that truncates the puzzle."""


class CombinatoricsUndefined(PuzzleError):
    """The critical orbit hits a boundary ray, so deeper labels make no sense."""

    def __init__(self, depth: int, message: str = ""):
        self.depth = depth
        super().__init__(message or f"combinatorics undefined at depth {depth}")


class DepthUnavailable(PuzzleError):
    """A comparison was requested beyond the constructed depth."""


class RootFindingFailed(PuzzleError):
    pass


class RayLost(PuzzleError):
    """Ray corrector diverged (step rejected twice at minimal damping)."""


class NotLanded(PuzzleError):
    """Ray reached h_stop without converging; caller may extend the trace."""


class DegenerateAnnulus(PuzzleError):
    """Annulus boundary curves touch within one grid cell."""


class NonConvergence(PuzzleError):
    """Elliptic solve failed to reach its residual target."""


class HypothesisNotMet(PuzzleError):
    """A verification row's hypotheses fail; the row is skipped, not failed."""


# -- internal consistency failures (exit 1) ----------------------------------

class LabelMismatch(PuzzleError):
    """Symbolic and geometric labelings disagree; indicates a bug."""
    exit_code = 1


# -- inconclusive-budget errors (exit 3) -------------------------------------

class BudgetError(PuzzleError):
    exit_code = 3


class BudgetExhausted(BudgetError):
    """Inconclusive: a budget ran out. Never means mathematical absence."""

    def __init__(self, message: str = "", *, budget: int | None = None,
                 operation: str = ""):
        self.budget = budget
        self.operation = operation
        super().__init__(message or f"budget exhausted in {operation or 'operation'}")


class NeverEscapes(BudgetError):
    """Central cascade exceeded budget: possibly renormalizable, inconclusive."""

    def __init__(self, message: str = "", *, depth: int | None = None):
        self.depth = depth
        super().__init__(message or "orbit never escapes the first child within budget"
                         + (f" (depth {depth})" if depth is not None else ""))


class NotRecurrent(BudgetError):
    """A needed return to a critical piece never happened within budget."""

    def __init__(self, depth: int, scanned: int):
        self.depth = depth
        self.scanned = scanned
        super().__init__(
            f"no return to the critical piece of depth {depth} "
            f"within {scanned} iterates")
