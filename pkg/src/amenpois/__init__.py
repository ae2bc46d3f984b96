"""Compound-Poisson approximation toolkit for group-indexed binary structures.

Subpackages cover discrete metric groups and their windows, the compound
Poisson law with its Stein-equation machinery, empirical mixing estimators,
simulators for binary random structures, the bound/estimation engine, and a
configuration-driven experiment harness with a CLI (`amenpois`).
"""

from amenpois.errors import (
    AmenpoisError,
    ConfigError,
    DomainError,
    EstimationError,
    NumericError,
    RegionError,
    ResourceBudgetError,
)

__all__ = [
    "AmenpoisError",
    "ConfigError",
    "DomainError",
    "EstimationError",
    "NumericError",
    "RegionError",
    "ResourceBudgetError",
]

__version__ = "0.1.0"
