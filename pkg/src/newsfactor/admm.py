"""Sparse factorization of returns against word intensities.

Fits ``R ~ U W Y`` with ``U >= 0`` and a sparse group lasso penalty on the
columns of ``W``::

    1/2 ||R - U W Y||_F^2 + lam * sum_j ||W_j||_2 + mu * ||W||_1

by ADMM on the split ``A = U``, ``B = W``. Every sub-update is an exact
minimizer of the augmented Lagrangian in one block of variables.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionError, DivergenceError
from .linalg import SchurFactors, solve_sylvester, sylvester_b_factors
from .prox import ProxParams, nonneg_project, sparse_group_prox_columns

__all__ = [
    "SolverConfig",
    "AdmmState",
    "FactorModel",
    "objective",
    "augmented_lagrangian",
    "grad_a",
    "grad_b",
    "update_a",
    "update_b",
    "update_u",
    "update_w",
    "update_duals",
    "init_state",
    "lambda_max",
    "fit",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    d: int = 10
    lam: float = 1e-3
    mu: float = 1e-4
    rho: float = 0.1
    max_iters: int = 500
    tol_primal: float = 1e-4
    seed: int = 0
    tol_dual: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if not (self.lam >= 0 and self.mu >= 0):
            raise ValueError("lam and mu must be nonnegative")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol_primal > 0:
            raise ValueError("tol_primal must be positive")
        if self.tol_dual is not None and not self.tol_dual > 0:
            raise ValueError("tol_dual must be positive")

    @property
    def prox(self) -> ProxParams:
        return ProxParams(self.lam, self.mu, self.rho)


@dataclass
class FactorModel:
    """Stock factors ``u`` (n x d, nonnegative) and word map ``w`` (d x m)."""

    u: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        if self.u.ndim != 2 or self.w.ndim != 2 or self.u.shape[1] != self.w.shape[0]:
            raise DimensionError(f"u{self.u.shape} and w{self.w.shape} do not share a latent dimension")
        if np.any(self.u < 0):
            raise ValueError("stock factors must be nonnegative")

    @property
    def n(self):
        return self.u.shape[0]

    @property
    def d(self):
        return self.u.shape[1]

    @property
    def m(self):
        return self.w.shape[1]


@dataclass
class AdmmState:
    a: np.ndarray
    b: np.ndarray
    u: np.ndarray
    w: np.ndarray
    c: np.ndarray
    d_dual: np.ndarray
    iter: int = 0
    converged: bool = False
    history: dict = field(default_factory=lambda: {
        "objective": [], "primal_u": [], "primal_w": [], "dual_u": [], "dual_w": []})

    def copy(self) -> "AdmmState":
        return AdmmState(
            self.a.copy(), self.b.copy(), self.u.copy(), self.w.copy(),
            self.c.copy(), self.d_dual.copy(), self.iter, self.converged,
            {k: list(v) for k, v in self.history.items()},
        )


def _check_shapes(r, y, u=None, w=None):
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    if r.ndim != 2 or y.ndim != 2 or r.shape[1] != y.shape[1]:
        raise DimensionError(f"R{r.shape} and Y{y.shape} must share the day axis")
    if u is not None and u.shape[0] != r.shape[0]:
        raise DimensionError(f"U has {u.shape[0]} rows, R has {r.shape[0]}")
    if w is not None and w.shape[1] != y.shape[0]:
        raise DimensionError(f"W has {w.shape[1]} columns, Y has {y.shape[0]} rows")
    if u is not None and w is not None and u.shape[1] != w.shape[0]:
        raise DimensionError(f"U{u.shape} and W{w.shape} are not conformable")
    return r, y


def _penalty(w, lam, mu):
    return lam * np.linalg.norm(w, axis=0).sum() + mu * np.abs(w).sum()


def objective(r, y, u, w, cfg: SolverConfig) -> float:
    """``1/2 ||R - U W Y||_F^2 + lam * sum_j ||W_j||_2 + mu * ||W||_1``."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    r, y = _check_shapes(r, y, u, w)
    resid = r - u @ (w @ y)
    return 0.5 * float(np.sum(resid * resid)) + float(_penalty(w, cfg.lam, cfg.mu))


def augmented_lagrangian(state: AdmmState, r, y, cfg: SolverConfig) -> float:
    """Augmented Lagrangian at the current iterate; ``inf`` if ``U`` has a negative entry."""
    if np.any(state.u < 0):
        return np.inf
    rho = cfg.rho
    resid = r - state.a @ (state.b @ y)
    gap_a = state.a - state.u
    gap_b = state.b - state.w
    return (
        0.5 * float(np.sum(resid * resid))
        + float(_penalty(state.w, cfg.lam, cfg.mu))
        + float(np.sum(state.c * gap_a)) + float(np.sum(state.d_dual * gap_b))
        + 0.5 * rho * float(np.sum(gap_a * gap_a)) + 0.5 * rho * float(np.sum(gap_b * gap_b))
    )


def grad_a(state, r, y, cfg):
    """Gradient of the augmented Lagrangian with respect to ``A``."""
    by = state.b @ y
    return (state.a @ by - r) @ by.T + state.c + cfg.rho * (state.a - state.u)


def grad_b(state, r, y, cfg):
    """Gradient of the augmented Lagrangian with respect to ``B``."""
    a = state.a
    return a.T @ (a @ (state.b @ y) - r) @ y.T + state.d_dual + cfg.rho * (state.b - state.w)


def update_a(state: AdmmState, r, y, cfg: SolverConfig, ryt=None, yyt=None):
    """Closed-form ``A = (R Y^T B^T - C + rho U)(B Y Y^T B^T + rho I)^{-1}``.

    ``ryt`` and ``yyt`` (``R Y^T`` and ``Y Y^T``) may be passed in to avoid
    recomputing them every iteration.
    """
    if ryt is None:
        ryt = r @ y.T
    if yyt is None:
        yyt = y @ y.T
    b = state.b
    gram = b @ yyt @ b.T
    gram[np.diag_indices_from(gram)] += cfg.rho
    rhs = ryt @ b.T - state.c + cfg.rho * state.u
    # gram is symmetric positive definite; solve gram A^T = rhs^T
    return scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), rhs.T).T


def update_b(state: AdmmState, r, y, cfg: SolverConfig, yyt_factors: SchurFactors | None = None,
             ryt=None, yyt=None):
    """Solve ``(A^T A / rho) B (Y Y^T) + B = (A^T R Y^T - D) / rho + W`` for ``B``."""
    if ryt is None:
        ryt = r @ y.T
    if yyt is None:
        yyt = y @ y.T
    if yyt_factors is None:
        yyt_factors = sylvester_b_factors(yyt)
    a = state.a
    lhs = (a.T @ a) / cfg.rho
    rhs = (a.T @ ryt - state.d_dual) / cfg.rho + state.w
    return solve_sylvester(lhs, yyt, rhs, b_factors=yyt_factors)


def update_u(state: AdmmState, cfg: SolverConfig):
    """``U = (A + C / rho)^+``."""
    return nonneg_project(state.a + state.c / cfg.rho)


def update_w(state: AdmmState, cfg: SolverConfig):
    """Column-wise sparse group lasso prox of ``B + D / rho``."""
    return sparse_group_prox_columns(state.b + state.d_dual / cfg.rho, cfg.prox)


def update_duals(state: AdmmState, cfg: SolverConfig):
    """Dual ascent ``C + rho (A - U)``, ``D + rho (B - W)``."""
    return (
        state.c + cfg.rho * (state.a - state.u),
        state.d_dual + cfg.rho * (state.b - state.w),
    )


def init_state(n: int, m: int, cfg: SolverConfig) -> AdmmState:
    """Seeded start: ``U = A ~ U[0,1)/sqrt(d)``, everything else zero."""
    rng = np.random.default_rng(cfg.seed)
    u = rng.random((n, cfg.d)) / np.sqrt(cfg.d)
    zeros_w = np.zeros((cfg.d, m))
    return AdmmState(
        a=u.copy(), b=zeros_w.copy(), u=u, w=zeros_w.copy(),
        c=np.zeros((n, cfg.d)), d_dual=zeros_w.copy(),
    )


def lambda_max(r, y, u, mu: float = 0.0) -> float:
    """Smallest group weight for which ``W = 0`` is stationary given ``U``.

    With ``W = 0`` the loss gradient in ``W`` is ``-U^T R Y^T``; every column
    is held at zero once ``lam`` exceeds its soft-thresholded norm.
    """
    g = np.asarray(u).T @ np.asarray(r) @ np.asarray(y).T
    g = np.sign(g) * np.maximum(np.abs(g) - mu, 0.0)
    return float(np.linalg.norm(g, axis=0).max())


def _rel(x, ref):
    return float(np.linalg.norm(x) / max(1.0, np.linalg.norm(ref)))


def _finite(name, x, iteration):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"non-finite {name} at iteration {iteration}", iteration=iteration)
    return x


def fit(r, y, cfg: SolverConfig, state: AdmmState | None = None):
    """Run ADMM until the relative primal residuals drop below ``tol_primal``.

    The primal residuals are ``||A - U|| / max(1, ||U||)`` and the analogue
    for ``B, W``. They are small right after the first iteration of a cold
    start, so the relative per-iteration change of ``U`` and ``W`` must also
    be below ``tol_dual`` (defaults to ``tol_primal``).

    Parameters
    ----------
    r : (n, s) array
        Log returns, one column per day.
    y : (m, s) array
        Nonnegative word intensities for the same days.
    cfg : SolverConfig
    state : AdmmState, optional
        Warm start; a seeded fresh state is used otherwise.

    Returns
    -------
    model : FactorModel
    state : AdmmState
        Final iterate with per-iteration history of the objective (evaluated
        at ``U, W``) and the two relative primal residuals.
    """
    r, y = _check_shapes(r, y)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(y))):
        raise ValueError("returns and word intensities must be finite")
    if np.any(y < 0):
        raise ValueError("word intensities must be nonnegative")
    n, m = r.shape[0], y.shape[0]
    if state is None:
        state = init_state(n, m, cfg)
    with np.errstate(over="ignore", invalid="ignore"):
        ryt = r @ y.T
        yyt = y @ y.T
    factors = sylvester_b_factors(yyt)
    hist = state.history
    tol_dual = cfg.tol_primal if cfg.tol_dual is None else cfg.tol_dual
    for it in range(state.iter, cfg.max_iters):
        u_prev, w_prev = state.u, state.w
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                state.a = _finite("a", update_a(state, r, y, cfg, ryt=ryt, yyt=yyt), it + 1)
                state.b = _finite("b", update_b(state, r, y, cfg, yyt_factors=factors, ryt=ryt, yyt=yyt), it + 1)
                state.u = update_u(state, cfg)
                state.w = update_w(state, cfg)
                state.c, state.d_dual = update_duals(state, cfg)
        except (ValueError, np.linalg.LinAlgError) as exc:
            # overflow inside a sub-solve (e.g. a non-finite Gram matrix)
            raise DivergenceError(f"numerical breakdown at iteration {it + 1}: {exc}", iteration=it + 1) from exc
        _finite("c", state.c, it + 1)
        _finite("d_dual", state.d_dual, it + 1)
        state.iter = it + 1
        pu = _rel(state.a - state.u, state.u)
        pw = _rel(state.b - state.w, state.w)
        hist["objective"].append(objective(r, y, state.u, state.w, cfg))
        hist["primal_u"].append(pu)
        hist["primal_w"].append(pw)
        du = _rel(state.u - u_prev, state.u)
        dw = _rel(state.w - w_prev, state.w)
        hist["dual_u"].append(du)
        hist["dual_w"].append(dw)
        if max(pu, pw) < cfg.tol_primal and max(du, dw) < tol_dual:
            state.converged = True
            break
    log.debug("admm stopped after %d iterations (converged=%s)", state.iter, state.converged)
    return FactorModel(state.u.copy(), state.w.copy()), state
