"""Mean-field monomer-dimer model with random monomer activities.

Variational limit of the pressure, exact finite-N partition functions and
disorder-replica studies.
"""
from .distributions import (
    ActivityDistribution,
    DistributionError,
    DivergenceError,
    QuadratureError,
    derived_seed,
    dist_from_mapping,
    parse_dist,
)
from .exact import (
    CompleteModelInstance,
    PrecisionWarning,
    SizeError,
    WeightedGraph,
    gibbs_observables,
    hermite_log_partition,
    hl_partition,
    mean_partition_bound,
    symmetric_log_partition,
    wick_partition,
)
from .experiments import (
    ConcentrationBoundInputs,
    StudyError,
    azuma_bound,
    run_pressure_study,
    self_averaging_decay,
    uniform_lln_study,
)
from .variational import (
    ModelParams,
    SolverError,
    VariationalSolution,
    laplace_correction,
    phi,
    pressure_curve,
    solve_fixed_point,
    xi_star_bounds,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityDistribution", "DistributionError", "DivergenceError", "QuadratureError",
    "derived_seed", "dist_from_mapping", "parse_dist",
    "CompleteModelInstance", "PrecisionWarning", "SizeError", "WeightedGraph",
    "gibbs_observables", "hermite_log_partition", "hl_partition", "mean_partition_bound",
    "symmetric_log_partition", "wick_partition",
    "ConcentrationBoundInputs", "StudyError", "azuma_bound", "run_pressure_study",
    "self_averaging_decay", "uniform_lln_study",
    "ModelParams", "SolverError", "VariationalSolution", "laplace_correction", "phi",
    "pressure_curve", "solve_fixed_point", "xi_star_bounds",
]
