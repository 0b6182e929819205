"""Predict daily stock returns from newspaper word counts with a sparse, nonnegative factor model."""
from .admm import AdmmState, FactorModel, SolverConfig, fit, objective
from .errors import (ConvergenceError, DataError, DimensionError, DivergenceError, NewsFactorError,
                     NumericalError, SingularityError, UndefinedMetricError)
from .linalg import real_schur, solve_sylvester
from .predict import closest_stocks, directional_accuracy, predict_day, predict_returns
from .prox import ProxParams, nonneg_project, sparse_group_prox

__version__ = "0.1.0"

__all__ = [
    "AdmmState", "FactorModel", "SolverConfig", "fit", "objective",
    "ConvergenceError", "DataError", "DimensionError", "DivergenceError", "NewsFactorError",
    "NumericalError", "SingularityError", "UndefinedMetricError",
    "real_schur", "solve_sylvester",
    "closest_stocks", "directional_accuracy", "predict_day", "predict_returns",
    "ProxParams", "nonneg_project", "sparse_group_prox",
]
