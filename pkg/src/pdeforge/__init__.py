"""Automated PDE solver synthesis: analysis, candidate generation, and a judge tournament."""

from .analysis import AnalysisReport, run_analysis
from .config import ConfigError, load_config
from .domain import make_grid, registry_get
from .genesis import SolverCandidate, generate_candidates
from .pipeline import EXIT_CODES, Run, StageError, evaluate_program
from .report import write_costs, write_report

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport",
    "ConfigError",
    "EXIT_CODES",
    "Run",
    "SolverCandidate",
    "StageError",
    "evaluate_program",
    "generate_candidates",
    "load_config",
    "make_grid",
    "registry_get",
    "run_analysis",
    "write_costs",
    "write_report",
]
