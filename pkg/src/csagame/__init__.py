"""Switchable-collateralization (contingent CSA) valuation and game engine."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    ContractViolation,
    RegressionError,
    SimulationError,
)
from .market import CoefSpec, ModelParams, PathBundle, RateCurve, discount, simulate_paths

__all__ = [
    "__version__",
    "CoefSpec",
    "ConfigurationError",
    "ContractViolation",
    "ModelParams",
    "PathBundle",
    "RateCurve",
    "RegressionError",
    "SimulationError",
    "discount",
    "simulate_paths",
]
