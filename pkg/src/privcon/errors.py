"""Exception types shared across the package."""


class GraphError(ValueError):
    """Invalid graph description (bad index, weight, self-loop, duplicate edge)."""


class PreconditionError(ValueError):
    """An operation was called outside its documented preconditions."""


class StepsizeError(PreconditionError):
    """Stepsize outside the admissible range for the chosen algorithm and graph."""


class ConvergenceError(RuntimeError):
    """An iterative numerical routine failed to converge."""
