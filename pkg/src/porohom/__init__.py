"""Reiterated homogenization of damped waves in periodically perforated media."""

from .errors import (CompatibilityError, ConfigError, FemError, MeshError, ModelError,
                     NonConvergenceError, PorohomError, SolverError)

__version__ = "0.1.0"
