"""Power flow model and randomized cluster-based reactive power optimization for microgrids."""

from .errors import (
    ConfigurationError,
    ConvergenceError,
    NumericalError,
    OrpfError,
    SchemaError,
    ValidationError,
)
from .grid import (
    GreenMatrix,
    GridGraph,
    build_grid,
    effective_impedance,
    effective_resistance_matrix,
    green_matrix,
    uniform_angle,
)
from .gossip import OrpfSystem, SimulationConfig, Trace, monte_carlo, run
from .kernels import BACKEND
from .model import (
    build_clusters,
    centralized_optimum,
    quadratic_model,
    subproblem_update_exact,
    subproblem_update_measured,
)
from .network_io import load_bundled, load_network, save_network
from .powerflow import ScenarioSpec, approx_state, approximation_error, solve_exact, total_losses
from .rates import beta, exact_rate_R, optimal_tree_clustering, rate_bound, rate_report

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigurationError",
    "ConvergenceError",
    "GreenMatrix",
    "GridGraph",
    "NumericalError",
    "OrpfError",
    "OrpfSystem",
    "ScenarioSpec",
    "SchemaError",
    "SimulationConfig",
    "Trace",
    "ValidationError",
    "approx_state",
    "approximation_error",
    "beta",
    "build_clusters",
    "build_grid",
    "centralized_optimum",
    "effective_impedance",
    "effective_resistance_matrix",
    "exact_rate_R",
    "green_matrix",
    "load_bundled",
    "load_network",
    "monte_carlo",
    "optimal_tree_clustering",
    "quadratic_model",
    "rate_bound",
    "rate_report",
    "run",
    "save_network",
    "solve_exact",
    "subproblem_update_exact",
    "subproblem_update_measured",
    "total_losses",
    "uniform_angle",
]
