"""Proximal maps used by the factorization solver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ProxParams", "sparse_group_prox", "sparse_group_prox_columns", "nonneg_project"]


@dataclass(frozen=True)
class ProxParams:
    """Weights of ``lam*||u||_2 + mu*||u||_1 + rho/2*||u - v||^2``."""

    lam: float
    mu: float
    rho: float

    def __post_init__(self):
        if not (self.lam >= 0 and self.mu >= 0):
            raise ValueError(f"lam and mu must be >= 0, got lam={self.lam}, mu={self.mu}")
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")


def sparse_group_prox(v, params: ProxParams):
    """Minimizer of ``lam*||u||_2 + mu*||u||_1 + rho/2*||u - v||_2^2``.

    Soft-threshold each coordinate at ``mu/rho`` (scaled by ``rho``), then
    shrink the whole vector towards zero by ``lam`` in Euclidean norm. The
    result is exactly zero whenever the soft-thresholded vector has norm at
    most ``lam``.
    """
    v = np.asarray(v, dtype=float)
    return sparse_group_prox_columns(v.reshape(-1, 1), params)[:, 0]


def sparse_group_prox_columns(v, params: ProxParams):
    """Apply :func:`sparse_group_prox` to every column of a matrix."""
    v = np.asarray(v, dtype=float)
    lam, mu, rho = params.lam, params.mu, params.rho
    w = rho * np.sign(v) * np.maximum(np.abs(v) - mu / rho, 0.0)
    norms = np.linalg.norm(w, axis=0)
    keep = norms > lam
    scale = np.zeros_like(norms)
    scale[keep] = (norms[keep] - lam) / (rho * norms[keep])
    return w * scale


def nonneg_project(a):
    """Euclidean projection onto the nonnegative orthant (elementwise max with 0)."""
    return np.maximum(np.asarray(a, dtype=float), 0.0)
