"""Mini-batch stochastic variance-reduced Newton (Mb-SVRN) and baselines."""

from mbsvrn.dataset import (
    Dataset,
    FeatureMapSpec,
    SyntheticSpec,
    apply_feature_map,
    generate_synthetic,
    load_dense_csv,
    load_libsvm,
)
from mbsvrn.errors import ConvergenceError, DataError, NotPositiveDefiniteError
from mbsvrn.linalg import SpdFactorization, factorize, solve
from mbsvrn.objective import Objective, ObjectiveConstants
from mbsvrn.solvers import (
    Method,
    SolverConfig,
    Status,
    Trajectory,
    neighborhood_check,
    run,
    run_mb_svrn,
    run_subsampled_newton,
    run_svrg,
    solve_reference,
)

__all__ = [
    "ConvergenceError",
    "DataError",
    "Dataset",
    "FeatureMapSpec",
    "Method",
    "NotPositiveDefiniteError",
    "Objective",
    "ObjectiveConstants",
    "SolverConfig",
    "SpdFactorization",
    "Status",
    "SyntheticSpec",
    "Trajectory",
    "apply_feature_map",
    "factorize",
    "generate_synthetic",
    "load_dense_csv",
    "load_libsvm",
    "neighborhood_check",
    "run",
    "run_mb_svrn",
    "run_subsampled_newton",
    "run_svrg",
    "solve",
    "solve_reference",
]

__version__ = "0.1.0"
