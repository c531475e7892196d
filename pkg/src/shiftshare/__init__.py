"""Shift-share instrumented local projections for regional export shocks.

Modules
-------
panel, loaders
    Panel containers, CSV loading and estimation-sample assembly.
instruments
    Baseline, destination-demand and long-window shift-share instruments.
regress
    OLS, 2SLS, cluster-robust covariance, local projections, binscatter.
dgp
    Gravity-based synthetic panels with known elasticity paths.
taxonomy
    Risky / sustainable activity flags, concordances and subgroup series.
pipeline, cli
    End-to-end wiring and the ``shiftshare`` command.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataValidationError,
    DegenerateRegionError,
    EmptySampleError,
    EstimationError,
    RankDeficiencyError,
    ShiftShareError,
    WeakInstrumentError,
)

__all__ = [
    "ConfigError",
    "DataValidationError",
    "DegenerateRegionError",
    "EmptySampleError",
    "EstimationError",
    "RankDeficiencyError",
    "ShiftShareError",
    "WeakInstrumentError",
    "__version__",
]
