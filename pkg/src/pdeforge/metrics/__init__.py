from .catalog import CATALOG, FeedbackType, catalog_json, catalog_listing, compute_feedback
from .core import FeedbackRecord, MetricError, cfl_max, convergence_order, darcy_residual, nrmse, pde_residual
from .invariants import invariant_metrics

__all__ = [
    "CATALOG",
    "FeedbackRecord",
    "FeedbackType",
    "MetricError",
    "catalog_json",
    "catalog_listing",
    "cfl_max",
    "compute_feedback",
    "convergence_order",
    "darcy_residual",
    "invariant_metrics",
    "nrmse",
    "pde_residual",
]
