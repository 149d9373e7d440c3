"""Exception types shared across the engine."""


class VigrainError(Exception):
    """Base class for all engine errors."""


class SingularGeometryError(VigrainError):
    """Two particle centers coincide; the contact normal is undefined."""


class StaleNeighborListError(VigrainError):
    """A neighbor list was used after its displacement guard was violated."""


class SolverFailureError(VigrainError):
    """An iterative solve did not reach its tolerance.

    Carries the final residual norm so callers can report or retry.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class IndefiniteOperatorError(SolverFailureError):
    """CG detected non-positive curvature: the operator is not SPD."""


class StepFailureError(SolverFailureError):
    """Newton iteration for an implicit step did not converge."""


class ConfigError(VigrainError):
    """A run configuration document is malformed or out of range."""
