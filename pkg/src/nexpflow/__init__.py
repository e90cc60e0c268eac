"""Finite-resolution experiments on N-expansive flows and their suspensions."""

__version__ = "0.1.0"

from .errors import (ConfigError, ConstraintViolation, CoverageError, DomainError,  # noqa: E402
                     InvalidChain, InvalidPair, InvalidParameter, NExpError, ResolutionError,
                     UnsupportedSystem)
from .systems import (BaseSystem, ExplicitSystem, Odometer, ShiftSystem, SymbolicPoint,  # noqa: E402
                      block_recoding, build_system, convergent_fixed_points, finite_permutation,
                      full_shift, golden_mean_sft, odometer, pullback_metric)
from .suspension import (BWInterval, Chain, SuspensionFlow, SuspensionPoint, bw_distance,  # noqa: E402
                         chain_length, suspend)

__all__ = [
    "__version__",
    "NExpError", "InvalidParameter", "ResolutionError", "ConstraintViolation",
    "UnsupportedSystem", "InvalidPair", "InvalidChain", "DomainError", "CoverageError",
    "ConfigError",
    "BaseSystem", "ShiftSystem", "Odometer", "ExplicitSystem", "SymbolicPoint",
    "full_shift", "golden_mean_sft", "odometer", "convergent_fixed_points",
    "finite_permutation", "pullback_metric", "block_recoding", "build_system",
    "SuspensionFlow", "SuspensionPoint", "Chain", "BWInterval", "suspend", "chain_length",
    "bw_distance",
]
