"""Return, price and direction predictions from a fitted factor model."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .admm import FactorModel
from .errors import DimensionError, UndefinedMetricError

__all__ = [
    "Prediction",
    "predict_returns",
    "predict_day",
    "directional_accuracy",
    "direction_hits",
    "correlation_distance",
    "closest_stocks",
]


@dataclass
class Prediction:
    """One day's forecast for every stock.

    ``up`` is True exactly when the predicted log return is positive, so a
    flat forecast counts as "down" (do not buy).
    """

    day: int
    r_hat: np.ndarray
    x_hat: np.ndarray
    up: np.ndarray


def predict_returns(model: FactorModel, y):
    """Predicted log returns ``U (W y)``.

    ``y`` may be one word-intensity vector (length m) or an (m, T) matrix
    of days, giving an (n,) or (n, T) result.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[0] != model.m:
        raise DimensionError(f"expected {model.m} word intensities, got {y.shape[0]}")
    return model.u @ (model.w @ y)


def predict_day(model: FactorModel, y_t, prev_close, day: int = 0) -> Prediction:
    """Forecast closes as ``prev_close * exp(r_hat)``."""
    r_hat = predict_returns(model, y_t)
    prev_close = np.asarray(prev_close, dtype=float)
    return Prediction(day, r_hat, prev_close * np.exp(r_hat), r_hat > 0)


def direction_hits(r_hat, r, mask=None):
    """Per-entry correctness and eligibility of direction calls.

    Entries with a zero actual return, or outside ``mask``, are not
    eligible. Returns ``(hits, eligible)`` boolean arrays.
    """
    r_hat = np.asarray(r_hat, dtype=float)
    r = np.asarray(r, dtype=float)
    if r_hat.shape != r.shape:
        raise DimensionError(f"prediction shape {r_hat.shape} != actual shape {r.shape}")
    eligible = r != 0
    if mask is not None:
        eligible &= np.asarray(mask, dtype=bool)
    hits = (r_hat > 0) == (r > 0)
    return hits & eligible, eligible


def directional_accuracy(r_hat, r, mask=None) -> float:
    """Fraction of eligible stock-days where the predicted direction is right."""
    hits, eligible = direction_hits(r_hat, r, mask)
    total = int(eligible.sum())
    if total == 0:
        raise UndefinedMetricError("no eligible stock-days to score")
    return hits.sum() / total


def correlation_distance(u):
    """Pairwise ``1 - Pearson correlation`` between rows of ``u``.

    Rows with zero variance have undefined distances (NaN) except to
    themselves; the diagonal is always 0.
    """
    u = np.asarray(u, dtype=float)
    centered = u - u.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    ok = norms > 0
    unit = np.zeros_like(centered)
    unit[ok] = centered[ok] / norms[ok, None]
    dist = 1.0 - unit @ unit.T
    dist[~ok, :] = np.nan
    dist[:, ~ok] = np.nan
    np.fill_diagonal(dist, 0.0)
    return np.clip(dist, 0.0, 2.0)


def closest_stocks(model_or_u, target: int, k: int):
    """Indices of the ``k`` stocks nearest to ``target`` by correlation distance.

    Ties are broken by stock index. Stocks whose factor row has zero
    variance are skipped with a warning.
    """
    u = model_or_u.u if isinstance(model_or_u, FactorModel) else np.asarray(model_or_u, dtype=float)
    n = u.shape[0]
    if not 0 <= target < n:
        raise IndexError(f"target {target} out of range for {n} stocks")
    if not 0 < k < n:
        raise ValueError(f"k must satisfy 0 < k < n, got k={k}, n={n}")
    dist = correlation_distance(u)
    row = dist[target]
    if np.isnan(row).all() or np.all(u[target] == u[target][0]):
        raise UndefinedMetricError(f"factor row of stock {target} has zero variance")
    flat = [i for i in range(n) if i != target and np.isnan(row[i])]
    if flat:
        warnings.warn(f"excluding {len(flat)} stocks with zero-variance factor rows: {flat}", stacklevel=2)
    candidates = [i for i in range(n) if i != target and not np.isnan(row[i])]
    candidates.sort(key=lambda i: (row[i], i))
    return candidates[:k]
