"""Channel capacity by the Arimoto-Blahut iteration, with convergence diagnostics."""

from .analysis import (
    ConvergenceTable,
    IndexType,
    ReferenceOptimum,
    Regime,
    annotate_trace,
    classify_indexes,
    fit_rate,
    fit_tail,
    iteration_bound_check,
    reference_optimum,
)
from .info import (
    Channel,
    Distribution,
    entropy,
    kl_divergence,
    mutual_information,
    nats_to_bits,
    output_distribution,
    row_divergence,
)
from .oracle import analytic_capacity, grid_search_capacity
from .solver import SolverConfig, SolveReport, StopReason, ab_step, approx_capacity, capacity_upper_bound, solve

__all__ = [
    "Channel", "Distribution", "entropy", "kl_divergence", "mutual_information", "nats_to_bits",
    "output_distribution", "row_divergence",
    "SolverConfig", "SolveReport", "StopReason", "ab_step", "approx_capacity", "capacity_upper_bound", "solve",
    "analytic_capacity", "grid_search_capacity",
    "ConvergenceTable", "IndexType", "ReferenceOptimum", "Regime", "annotate_trace", "classify_indexes",
    "fit_rate", "fit_tail", "iteration_bound_check", "reference_optimum",
]
