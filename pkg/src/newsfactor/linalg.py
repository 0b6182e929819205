"""Dense kernels for the generalized Sylvester equation ``A X B + X = C``.

The solver follows the Hessenberg-Schur approach: ``A`` is reduced to upper
Hessenberg form, ``B`` to real Schur form, and the transformed system is
solved column by column (two columns at a time across 2x2 Schur blocks).
The Schur factors of ``B`` depend only on ``B``, so they can be computed once
and reused for many right-hand sides and many ``A``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionError, SingularityError

__all__ = [
    "SchurFactors",
    "hessenberg_reduce",
    "real_schur",
    "sylvester_b_factors",
    "solve_sylvester",
    "back_substitute",
    "gauss_solve",
    "kronecker_oracle",
]

_EPS = np.finfo(float).eps
PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class SchurFactors:
    """Orthogonal similarity ``a = q @ t @ q.T``.

    ``t`` is upper Hessenberg (from :func:`hessenberg_reduce`) or
    quasi-upper-triangular (from :func:`real_schur`).
    """

    q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.q.setflags(write=False)
        self.t.setflags(write=False)


def _square(a, name="a"):
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def hessenberg_reduce(a) -> SchurFactors:
    """Householder reduction to upper Hessenberg form.

    Returns factors ``(q, h)`` with ``h = q.T @ a @ q``. Columns whose
    below-subdiagonal part is already zero are skipped, so a matrix that is
    already Hessenberg comes back unchanged with ``q = I``.
    """
    h = _square(a)
    n = h.shape[0]
    q = np.eye(n)
    for k in range(n - 2):
        x = h[k + 1:, k]
        if not np.any(x[1:]):
            continue
        alpha = -math.copysign(np.linalg.norm(x), x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        h[k + 1:, :] -= 2.0 * np.outer(v, v @ h[k + 1:, :])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v)
        q[:, k + 1:] -= 2.0 * np.outer(q[:, k + 1:] @ v, v)
    h[np.tril_indices(n, -2)] = 0.0
    return SchurFactors(q, h)


def _householder3(x):
    """Unit vector v with (I - 2vv^T) x parallel to e1; None if x[1:] == 0."""
    if not np.any(x[1:]):
        return None
    alpha = -math.copysign(np.linalg.norm(x), x[0])
    v = x.astype(float).copy()
    v[0] -= alpha
    return v / np.linalg.norm(v)


def _reflect(h, q, v, k, lo_col, hi_row):
    """Apply P = I - 2vv^T acting on indices k..k+len(v)-1 as a similarity."""
    p = len(v)
    rows = slice(k, k + p)
    h[rows, lo_col:] -= 2.0 * np.outer(v, v @ h[rows, lo_col:])
    h[:hi_row + 1, rows] -= 2.0 * np.outer(h[:hi_row + 1, rows] @ v, v)
    q[:, rows] -= 2.0 * np.outer(q[:, rows] @ v, v)


def _francis_step(h, q, lo, hi, shift_sum, shift_prod):
    """One implicit double-shift QR sweep on the active block h[lo:hi+1, lo:hi+1]."""
    x = h[lo, lo] ** 2 + h[lo, lo + 1] * h[lo + 1, lo] - shift_sum * h[lo, lo] + shift_prod
    y = h[lo + 1, lo] * (h[lo, lo] + h[lo + 1, lo + 1] - shift_sum)
    z = h[lo + 1, lo] * h[lo + 2, lo + 1]
    for k in range(lo, hi - 1):
        v = _householder3(np.array([x, y, z]))
        if v is not None:
            _reflect(h, q, v, k, max(lo, k - 1), min(k + 3, hi))
        if k > lo:
            h[k + 1, k - 1] = 0.0
            h[k + 2, k - 1] = 0.0
        x = h[k + 1, k]
        y = h[k + 2, k]
        if k < hi - 2:
            z = h[k + 3, k]
    v = _householder3(np.array([x, y]))
    if v is not None:
        _reflect(h, q, v, hi - 1, hi - 2, hi)
    h[hi, hi - 2] = 0.0


def _standardize_2x2(h, q, i):
    """Split the block h[i:i+2, i:i+2] by a rotation if its eigenvalues are real."""
    a, b, c, d = h[i, i], h[i, i + 1], h[i + 1, i], h[i + 1, i + 1]
    if c == 0.0:
        return
    p = 0.5 * (a - d)
    disc = p * p + b * c
    if disc < 0.0:
        return
    root = math.sqrt(disc)
    # eigenvector (lam - d, c) for the eigenvalue farther from d
    e0 = p + (root if p >= 0 else -root)
    nrm = math.hypot(e0, c)
    cs, sn = e0 / nrm, c / nrm
    g = np.array([[cs, -sn], [sn, cs]])
    h[i:i + 2, i:] = g.T @ h[i:i + 2, i:]
    h[:i + 2, i:i + 2] = h[:i + 2, i:i + 2] @ g
    q[:, i:i + 2] = q[:, i:i + 2] @ g
    h[i + 1, i] = 0.0


def real_schur(b, max_sweeps_per_dim: int = 30) -> SchurFactors:
    """Real Schur decomposition ``b = v @ s @ v.T``.

    Hessenberg reduction followed by Francis double-shift QR sweeps with
    deflation. 2x2 diagonal blocks of ``s`` carry complex-conjugate
    eigenvalue pairs only; blocks with real eigenvalues are split.

    Raises
    ------
    ConvergenceError
        If more than ``max_sweeps_per_dim * n`` sweeps are needed.
    """
    hf = hessenberg_reduce(b)
    h = hf.t.copy()
    q = hf.q.copy()
    n = h.shape[0]
    cap = max_sweeps_per_dim * n
    sweeps = 0
    its = 0
    hi = n - 1
    while hi > 0:
        lo = hi
        while lo > 0:
            scale = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            if scale == 0.0:
                scale = np.abs(h[: hi + 1, : hi + 1]).max()
            if abs(h[lo, lo - 1]) <= _EPS * scale:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            its = 0
            continue
        if lo == hi - 1:
            _standardize_2x2(h, q, lo)
            hi -= 2
            its = 0
            continue
        if sweeps >= cap:
            raise ConvergenceError(
                f"real Schur did not converge after {sweeps} sweeps; "
                f"{n - hi - 1} of {n} trailing eigenvalues deflated"
            )
        its += 1
        sweeps += 1
        if its % 10 == 0:
            # exceptional shift breaks cycles on e.g. permutation matrices
            ss = abs(h[hi, hi - 1]) + abs(h[hi - 1, hi - 2])
            shift_sum, shift_prod = 1.5 * ss, ss * ss
        else:
            shift_sum = h[hi - 1, hi - 1] + h[hi, hi]
            shift_prod = h[hi - 1, hi - 1] * h[hi, hi] - h[hi - 1, hi] * h[hi, hi - 1]
        _francis_step(h, q, lo, hi, shift_sum, shift_prod)
    h[np.tril_indices(n, -2)] = 0.0
    return SchurFactors(q, h)


def sylvester_b_factors(b) -> SchurFactors:
    """Factors of the right coefficient needed by :func:`solve_sylvester`.

    The column recurrence works on ``H Y S^T + Y = F``, so the Schur form
    taken is that of ``b.T``. For symmetric ``b`` this is the Schur form of
    ``b`` itself.
    """
    b = _square(b, "b")
    return real_schur(b.T)


def gauss_solve(m, rhs):
    """Gaussian elimination with partial pivoting.

    A pivot smaller than ``1e-12`` times the largest magnitude in its
    original row is treated as singular.
    """
    a = np.array(m, dtype=float)
    x = np.array(rhs, dtype=float)
    n = a.shape[0]
    row_scale = np.abs(a).max(axis=1)
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if p != k:
            a[[k, p]] = a[[p, k]]
            x[[k, p]] = x[[p, k]]
            row_scale[[k, p]] = row_scale[[p, k]]
        piv = a[k, k]
        if abs(piv) <= PIVOT_RTOL * row_scale[k] or piv == 0.0:
            raise SingularityError(f"zero pivot at elimination step {k} (|pivot| = {abs(piv):.3e})")
        if k + 1 < n:
            f = a[k + 1:, k] / piv
            a[k + 1:, k:] -= np.outer(f, a[k, k:])
            x[k + 1:] -= f * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def back_substitute(h, s, f):
    """Solve ``H Y S^T + Y = F`` for Y.

    ``h`` is upper Hessenberg (d x d), ``s`` quasi-upper-triangular
    (s x s) and ``f`` is d x s. Columns are resolved from last to first;
    a nonzero ``s[k, k-1]`` marks a 2x2 block whose two columns are solved
    together from the stacked 2d x 2d system.
    """
    h = np.asarray(h, dtype=float)
    s = np.asarray(s, dtype=float)
    f = np.asarray(f, dtype=float)
    d, ns = f.shape
    if h.shape != (d, d) or s.shape != (ns, ns):
        raise DimensionError(f"shapes h{h.shape}, s{s.shape}, f{f.shape} are not conformable")
    eye = np.eye(d)
    y = np.zeros((d, ns))
    k = ns - 1
    while k >= 0:
        tail = slice(k + 1, ns)
        if k > 0 and s[k, k - 1] != 0.0:
            coupled = h @ (y[:, tail] @ s[[k - 1, k], tail].T)  # d x 2
            rhs = np.concatenate([f[:, k - 1] - coupled[:, 0], f[:, k] - coupled[:, 1]])
            big = np.block([
                [s[k - 1, k - 1] * h + eye, s[k - 1, k] * h],
                [s[k, k - 1] * h, s[k, k] * h + eye],
            ])
            try:
                sol = gauss_solve(big, rhs)
            except SingularityError as exc:
                raise SingularityError(
                    f"2x2 Schur block at columns {k - 1},{k}: some eigenvalue product "
                    f"lambda_i(A)*lambda_j(B) equals -1 ({exc})"
                ) from None
            y[:, k - 1] = sol[:d]
            y[:, k] = sol[d:]
            k -= 2
        else:
            rhs = f[:, k] - h @ (y[:, tail] @ s[k, tail])
            try:
                y[:, k] = gauss_solve(s[k, k] * h + eye, rhs)
            except SingularityError as exc:
                raise SingularityError(
                    f"column {k}: s_kk = {s[k, k]:.6g} times an eigenvalue of H equals -1 ({exc})"
                ) from None
            k -= 1
    return y


def solve_sylvester(a, b, c, b_factors: SchurFactors | None = None):
    """Solve ``a @ X @ b + X = c``.

    Parameters
    ----------
    a : (d, d) array
    b : (s, s) array
    c : (d, s) array
    b_factors : SchurFactors, optional
        Output of ``sylvester_b_factors(b)``; pass it to skip the Schur
        decomposition when ``b`` is fixed across many solves.
    """
    a = _square(a, "a")
    b = _square(b, "b")
    c = np.asarray(c, dtype=float)
    if c.shape != (a.shape[0], b.shape[0]):
        raise DimensionError(f"c has shape {c.shape}, expected {(a.shape[0], b.shape[0])}")
    if b_factors is None:
        b_factors = sylvester_b_factors(b)
    ha = hessenberg_reduce(a)
    f = ha.q.T @ c @ b_factors.q
    y = back_substitute(ha.t, b_factors.t, f)
    return ha.q @ y @ b_factors.q.T


def kronecker_oracle(a, b, c, max_size: int = 400):
    """Brute-force solve of ``(b.T kron a + I) vec(X) = vec(c)``.

    Intended as an independent check on :func:`solve_sylvester`; only
    practical for small problems (``d * s <= max_size``).
    """
    a = _square(a, "a")
    b = _square(b, "b")
    c = np.asarray(c, dtype=float)
    d, s = a.shape[0], b.shape[0]
    if c.shape != (d, s):
        raise DimensionError(f"c has shape {c.shape}, expected {(d, s)}")
    if d * s > max_size:
        raise ValueError(f"d*s = {d * s} exceeds max_size = {max_size}")
    big = np.kron(b.T, a) + np.eye(d * s)
    if not np.linalg.cond(big) < 1e12:
        raise SingularityError("Kronecker system is singular (condition number >= 1e12)")
    x = np.linalg.solve(big, c.ravel(order="F"))
    return x.reshape((d, s), order="F")
