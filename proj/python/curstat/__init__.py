"""Conditional state-entry probabilities from multistate current status data."""

from ._core import (
    ArgumentError,
    Error,
    EstimationError,
    StructureError,
    Tree,
    __version__,
    bootstrap_ci,
    estimate,
    gee,
    occupation,
    pav_fit,
    pseudo_values,
    run_study,
    select_bandwidth,
    simulate,
    true_psi,
)

__all__ = [
    "ArgumentError",
    "Error",
    "EstimationError",
    "StructureError",
    "Tree",
    "__version__",
    "bootstrap_ci",
    "estimate",
    "gee",
    "occupation",
    "pav_fit",
    "pseudo_values",
    "run_study",
    "select_bandwidth",
    "simulate",
    "true_psi",
]
