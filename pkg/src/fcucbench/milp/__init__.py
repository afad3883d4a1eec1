"""MILP intermediate representation, linearization helpers, and backends."""

from .backend import (BackendUnavailableError, HighsBackend, SolverBackend,
                      get_backend, register_backend, solve)
from .fileio import export_model, import_model
from .linearize import (add_complementary_pair, add_pwl_square,
                        linearize_bin_bin_product, linearize_bin_cont_product,
                        pwl_square_error_bound)
from .model import (BINARY, CONTINUOUS, INF, IndicatorConstraint,
                    LinearConstraint, ModelIR, ModelStats, Solution,
                    SolveOptions, Variable)

__all__ = [
    "BINARY", "CONTINUOUS", "INF",
    "ModelIR", "ModelStats", "Variable",
    "LinearConstraint", "IndicatorConstraint",
    "SolveOptions", "Solution",
    "SolverBackend", "HighsBackend", "BackendUnavailableError",
    "get_backend", "register_backend", "solve",
    "add_pwl_square", "pwl_square_error_bound",
    "linearize_bin_bin_product", "linearize_bin_cont_product",
    "add_complementary_pair",
    "export_model", "import_model",
]
