class ConvergenceError(RuntimeError):
    """An iterative method stopped before meeting its tolerance.

    ``iterate`` holds the last (or best) point reached.
    """

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


class SeparationError(ConvergenceError):
    """Monotone partial likelihood: the Cox coefficients diverge."""
