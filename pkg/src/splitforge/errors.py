"""Exception hierarchy shared across the package."""


class SplitForgeError(Exception):
    """Base class for all package errors."""


class MalformedZError(SplitForgeError, ValueError):
    """Z does not have a constant diagonal (or is otherwise malformed)."""


class DiagonalScalingError(SplitForgeError, ValueError):
    """Z_11 outside (0, 4): the induced |L_ii| >= 1 breaks the inner solve."""


class PresetArityError(SplitForgeError, ValueError):
    """A preset was requested with an incompatible operator count."""


class DegenerateDesignError(SplitForgeError, ValueError):
    """A design matrix is zero or otherwise degenerate."""


class InfeasibleDesignError(SplitForgeError):
    """A design problem has no solution.

    ``condition`` names the necessary condition found violated when the
    cause could be diagnosed before solving, else ``None``.
    """

    def __init__(self, message: str, condition: str | None = None, detail: dict | None = None):
        super().__init__(message)
        self.condition = condition
        self.detail = detail or {}


class SolverFailureError(SplitForgeError):
    """The conic backend did not return a usable solution."""


class NotStieltjesError(SplitForgeError, ValueError):
    """W has a positive off-diagonal entry."""


class RankDeficiencyError(SplitForgeError, ValueError):
    """W has more than one (near) zero pivot or eigenvalue."""


class IncompatibleFactorError(SplitForgeError, ValueError):
    """Two factors do not share the same Gram matrix."""


class DivergenceError(SplitForgeError):
    """An iteration blew up; ``iteration`` is where it was detected."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


class ArityError(SplitForgeError, ValueError):
    """Oracle list or state shape does not match the design."""


class EmptyClassError(SplitForgeError, ValueError):
    """Requested operator class admits no operator (e.g. l < mu)."""
