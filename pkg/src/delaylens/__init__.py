"""Reporting delays of versioned event datasets.

Snapshot diffing, weekly delays with censoring and cleaning, spatial
covariates, Kaplan-Meier curves, a penalized-spline cloglog hazard model,
delay-corrected counts and a synthetic-data generator.
"""

__version__ = "0.1.0"

from .delays import CleaningConfig, build_delay_dataset, compute_delay, filter_countries, \
    filter_historical_batches, winsorize
from .errors import ConvergenceError, DataError, DelayLensError, UsageError
from .events import SnapshotRelease, SnapshotStore, parse_snapshot
from .gam import FitResult, ModelSpec, SmoothTermSpec, fit_model
from .geo import GeoReference, PopulationRaster, assemble_covariates, haversine_km
from .nowcast import ReportingCDF, correct_counts, reporting_cdf
from .survival import empirical_hazard, expand_frame, kaplan_meier, survival_from_hazard
from .synth import SimConfig, simulate_releases

__all__ = [
    "CleaningConfig", "build_delay_dataset", "compute_delay", "filter_countries", "filter_historical_batches",
    "winsorize", "ConvergenceError", "DataError", "DelayLensError", "UsageError", "SnapshotRelease",
    "SnapshotStore", "parse_snapshot", "FitResult", "ModelSpec", "SmoothTermSpec", "fit_model", "GeoReference",
    "PopulationRaster", "assemble_covariates", "haversine_km", "ReportingCDF", "correct_counts",
    "reporting_cdf", "empirical_hazard", "expand_frame", "kaplan_meier", "survival_from_hazard", "SimConfig",
    "simulate_releases",
]
