"""Exception hierarchy shared by all porohom modules."""


class PorohomError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(PorohomError):
    """Invalid model, problem or run configuration."""


class ModelError(ConfigError):
    """Coefficient data violates a structural assumption."""


class MeshError(PorohomError):
    """A mesh cannot be built for the requested geometry."""


class FemError(PorohomError):
    """Assembly failure, e.g. a non-finite coefficient sample."""


class SolverError(PorohomError):
    """A linear or time-stepping solve failed."""


class NonConvergenceError(SolverError):
    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class CompatibilityError(SolverError):
    """Right-hand side of a pure Neumann problem is not orthogonal to constants."""
