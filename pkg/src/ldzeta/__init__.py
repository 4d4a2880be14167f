"""Numerical laboratory for large deviations of log|zeta| near the critical line."""
from .errors import BudgetError, ConfigError, DomainError, InfeasibleError, LdzetaError, PrecisionError
from .params import Ladder, LadderConfig, build_ladder, ladder_from_cutoffs

__version__ = "0.1.0"

__all__ = [
    "BudgetError", "ConfigError", "DomainError", "InfeasibleError", "LdzetaError", "PrecisionError",
    "Ladder", "LadderConfig", "build_ladder", "ladder_from_cutoffs",
]
