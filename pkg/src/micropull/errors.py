"""Exception types raised by the solvers and the specimen file loader."""


class SpecimenFormatError(ValueError):
    """A specimen file could not be parsed or violates a geometric invariant."""


class GapClosureError(RuntimeError):
    """The deflected beam touched (or crossed) the counter-electrode face.

    Consumed upstream as a pull-in signal, not as a fatal condition.
    """


class ConvergenceError(RuntimeError):
    """An iterative structural solve failed to reach its residual tolerance."""

    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class PullInNotFoundError(RuntimeError):
    """No non-convergent voltage was found below the search cap."""
