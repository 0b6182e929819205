"""Reference predictors and portfolios.

Predictors: flat price ("previous X"), repeated return ("previous R"),
per-stock autoregression, and a cross-sectional ridge regression on the
previous day of every stock. Portfolios: uniform and long-only minimum
variance with a return floor.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = [
    "ArModel",
    "Portfolio",
    "CrossRegressor",
    "previous_x",
    "previous_r",
    "ar_fit",
    "ar_predict",
    "ar_forecast",
    "cross_regress",
    "ridge_fit",
    "uniform_portfolio",
    "project_simplex",
    "project_simplex_halfspace",
    "min_variance_weights",
    "min_variance_portfolio",
]

log = logging.getLogger(__name__)

AR_ORDER = 10
RIDGE_FALLBACK = 1e-8
RIDGE_GRID = tuple(10.0 ** k for k in range(-4, 3))
SHRINKAGE = 0.1


def previous_x(close):
    """Flat-price forecast: day ``t`` closes where day ``t-1`` closed.

    ``close`` is (n, s+1) over days ``0..s``; the result is (n, s) for days
    ``1..s``. The implied return forecast is zero everywhere.
    """
    close = np.asarray(close, dtype=float)
    return close[:, :-1].copy()


def previous_r(r):
    """Repeat yesterday's return. Day 1 has no history and gets 0."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    out[..., 1:] = r[..., :-1]
    return out


@dataclass
class ArModel:
    """``value_t ~ intercept + sum_k coef[k] * value_{t-1-k}``."""

    coef: np.ndarray
    intercept: float

    @property
    def order(self):
        return len(self.coef)


def _lags(series, p):
    """Design matrix with rows ``(x_{t-1}, ..., x_{t-p})`` and targets ``x_t``."""
    T = len(series)
    X = np.column_stack([series[p - 1 - k: T - 1 - k] for k in range(p)])
    return X, series[p:]


def ridge_fit(X, Y, alpha):
    """Ridge regression with an unpenalized intercept.

    Returns ``(coef, intercept)`` with ``Y ~ X @ coef + intercept``; ``Y`` may
    be a vector or have one column per target.
    """
    xm = X.mean(axis=0)
    ym = Y.mean(axis=0)
    Xc = X - xm
    gram = Xc.T @ Xc
    gram[np.diag_indices_from(gram)] += alpha
    coef = np.linalg.solve(gram, Xc.T @ (Y - ym))
    return coef, ym - xm @ coef


def ar_fit(series, p: int = AR_ORDER) -> ArModel:
    """Least-squares AR(p) fit with intercept.

    Falls back to a ``1e-8`` ridge penalty on the slopes when the lagged
    design is rank deficient (for instance a constant series).
    """
    x = np.asarray(series, dtype=float)
    if p < 1:
        raise ValueError("order must be >= 1")
    if len(x) < 2 * p + 1:
        raise DataError(f"AR({p}) needs at least {2 * p + 1} samples, got {len(x)}")
    X, target = _lags(x, p)
    Xc = X - X.mean(axis=0)
    if np.linalg.matrix_rank(Xc) < p:
        warnings.warn(f"rank-deficient AR({p}) design; using ridge penalty {RIDGE_FALLBACK}", stacklevel=2)
        coef, icpt = ridge_fit(X, target, RIDGE_FALLBACK)
    else:
        coef, icpt = ridge_fit(X, target, 0.0)
    return ArModel(coef, float(icpt))


def ar_predict(model: ArModel, history):
    """One-step-ahead value from the most recent ``order`` observations."""
    h = np.asarray(history, dtype=float)
    p = model.order
    if len(h) < p:
        raise DataError(f"need {p} past values, got {len(h)}")
    return float(model.intercept + model.coef @ h[-1: -p - 1: -1])


def ar_forecast(model: ArModel, series, start: int):
    """One-step forecasts for ``series[start:]``, each using only earlier values."""
    x = np.asarray(series, dtype=float)
    p = model.order
    if start < p:
        raise DataError(f"start {start} leaves fewer than {p} lags")
    X = np.column_stack([x[start - 1 - k: len(x) - 1 - k] for k in range(p)])
    return model.intercept + X @ model.coef


@dataclass
class CrossRegressor:
    """Predict every stock from the previous day's values of all stocks."""

    coef: np.ndarray  # (n_in, n_out)
    intercept: np.ndarray
    alpha: float

    def predict(self, prev):
        """``prev`` is (n,) or (n, T) of previous-day values; returns the same shape."""
        prev = np.asarray(prev, dtype=float)
        if prev.ndim == 1:
            return prev @ self.coef + self.intercept
        return (prev.T @ self.coef + self.intercept).T


def cross_regress(train, val=None, grid=RIDGE_GRID) -> CrossRegressor:
    """Fit the cross-sectional ridge regressor.

    Parameters
    ----------
    train : (n, T) array
        Values (prices or returns) over the training days; day ``t`` is
        regressed on day ``t-1``.
    val : (n, T2) array, optional
        Validation days, used to pick the penalty from ``grid`` by mean
        squared one-step error. Its first column is predicted from the last
        training day. Without it the smallest penalty in ``grid`` is used.
    """
    train = np.asarray(train, dtype=float)
    if train.shape[1] < 2:
        raise DataError("cross regression needs at least two training days")
    X, Y = train[:, :-1].T, train[:, 1:].T
    if val is None or np.asarray(val).shape[1] == 0:
        alpha = min(grid)
        coef, icpt = ridge_fit(X, Y, alpha)
        return CrossRegressor(coef, icpt, alpha)
    val = np.asarray(val, dtype=float)
    joined = np.concatenate([train[:, -1:], val], axis=1)
    best = None
    for alpha in grid:
        coef, icpt = ridge_fit(X, Y, alpha)
        err = np.mean((joined[:, :-1].T @ coef + icpt - joined[:, 1:].T) ** 2)
        if best is None or err < best[0]:
            best = (err, alpha, coef, icpt)
    _, alpha, coef, icpt = best
    log.debug("cross regression penalty %g selected on validation", alpha)
    return CrossRegressor(coef, icpt, alpha)


@dataclass
class Portfolio:
    """Long-only weights; all zero means holding cash."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(self.weights < 0):
            raise ValueError("portfolio weights must be nonnegative")
        total = self.weights.sum()
        if not (abs(total) <= 1e-10 or abs(total - 1.0) <= 1e-10):
            raise ValueError(f"weights must sum to 0 or 1, got {total}")


def uniform_portfolio(n: int) -> Portfolio:
    return Portfolio(np.full(n, 1.0 / n))


def project_simplex(z):
    """Euclidean projection onto ``{w >= 0, sum(w) = 1}`` (sort-based)."""
    z = np.asarray(z, dtype=float)
    srt = np.sort(z)[::-1]
    css = np.cumsum(srt) - 1.0
    idx = np.arange(1, len(z) + 1)
    k = idx[srt - css / idx > 0][-1]
    return np.maximum(z - css[k - 1] / k, 0.0)


def project_simplex_halfspace(z, mu, q, tol=1e-13):
    """Projection onto the simplex intersected with ``{mu @ w >= q}``.

    The halfspace multiplier ``eta`` enters as ``project_simplex(z + eta*mu)``
    whose return ``mu @ w`` grows with ``eta``; bisection finds the ``eta``
    that lands on the constraint. Requires ``q <= max(mu)``.
    """
    w = project_simplex(z)
    if mu @ w >= q:
        return w
    lo, hi = 0.0, 1.0
    while mu @ project_simplex(z + hi * mu) < q:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError("return floor is infeasible")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mu @ project_simplex(z + mid * mu) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return project_simplex(z + hi * mu)


def min_variance_weights(cov, mean, target, tol=1e-8, max_iter=100_000):
    """Minimize ``w' cov w`` over long-only, fully invested ``w`` with ``mean @ w >= target``.

    Projected gradient descent with step ``1 / (2 * lambda_max(cov))``,
    stopped once an iteration moves ``w`` by less than ``tol``.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    mean = np.asarray(mean, dtype=float)
    n = len(mean)
    if n == 1:
        return np.ones(1)
    if target > mean.max():
        raise ValueError(f"target {target} exceeds the largest mean {mean.max()}")
    lip = 2.0 * np.linalg.eigvalsh(cov).max()
    step = 1.0 / lip if lip > 0 else 1.0
    w = project_simplex_halfspace(np.full(n, 1.0 / n), mean, target)
    for _ in range(max_iter):
        w_new = project_simplex_halfspace(w - step * 2.0 * (cov @ w), mean, target)
        if np.linalg.norm(w_new - w) < tol:
            w = w_new
            break
        w = w_new
    else:
        warnings.warn("minimum-variance iteration hit its cap", stacklevel=2)
    w = np.maximum(w, 0.0)
    return w / w.sum()


def min_variance_portfolio(returns, target_quantile: float = 0.95, shrinkage: float = SHRINKAGE,
                           tol: float = 1e-8, target_basis: str = "pooled") -> Portfolio:
    """Long-only minimum-variance portfolio with a return floor.

    Parameters
    ----------
    returns : (n, T) array
        Historical daily returns (one row per stock).
    target_quantile : float
        The floor on expected return is this quantile of all returns in the
        window pooled together (``target_basis="pooled"``) or of the per-stock
        mean returns (``target_basis="means"``). If no stock's mean reaches
        it, the floor drops to the best mean (with a warning); on daily data
        the pooled quantile usually does, which concentrates the portfolio.
    shrinkage : float
        Off-diagonal covariance entries are scaled by ``1 - shrinkage``.
    """
    r = np.atleast_2d(np.asarray(returns, dtype=float))
    if r.size == 0 or r.shape[1] == 0:
        raise DataError("empty return window")
    n = r.shape[0]
    if n == 1:
        return Portfolio(np.ones(1))
    mean = r.mean(axis=1)
    cov = np.cov(r, ddof=1) if r.shape[1] > 1 else np.zeros((n, n))
    cov = (1.0 - shrinkage) * cov + shrinkage * np.diag(np.diag(cov))
    if target_basis == "pooled":
        target = float(np.quantile(r, target_quantile))
    elif target_basis == "means":
        target = float(np.quantile(mean, target_quantile))
    else:
        raise ValueError(f"unknown target_basis {target_basis!r}")
    if target > mean.max():
        warnings.warn(
            f"return floor {target:.4g} above every mean return; relaxing to {mean.max():.4g}", stacklevel=2
        )
        target = float(mean.max())
    return Portfolio(min_variance_weights(cov, mean, target, tol=tol))
