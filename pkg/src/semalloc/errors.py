"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class InfeasibleError(ValueError):
    """The resource caps cannot accommodate the requested users."""


class NonConvergenceError(RuntimeError):
    """Iterative routine failed; ``best`` carries the best iterate found."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best
