# coding: utf-8

# # The two solves inside each ADMM iteration
#
# Every iteration solves one Sylvester-type equation for the unconstrained
# copy of W and applies one proximal map to get the sparse W back. Both are
# small, exact and worth seeing on their own.

# In[1]:

import time

import numpy as np

from newsfactor.linalg import kronecker_oracle, real_schur, solve_sylvester, sylvester_b_factors
from newsfactor.prox import ProxParams, sparse_group_prox

np.set_printoptions(precision=4, suppress=True)
rng = np.random.default_rng(3)


# # Real Schur form
#
# `real_schur` returns Q orthogonal and T quasi-upper-triangular with B = Q T Q^T.
# Complex eigenvalue pairs show up as 2x2 blocks on the diagonal.

# In[2]:

b = rng.standard_normal((5, 5))
f = real_schur(b)
print(f.t)
print("reconstruction error:", np.abs(f.q @ f.t @ f.q.T - b).max())
print("eigenvalues of B:", np.sort_complex(np.linalg.eigvals(b)))


# # A X B + X = C
#
# The textbook route vectorizes the equation into an (ds x ds) linear system.
# The Hessenberg-Schur route factors A and B separately and back-substitutes
# column by column, which is what keeps the W update cheap.

# In[3]:

d, s = 10, 40
a = rng.standard_normal((d, d)) / np.sqrt(d)
b = rng.standard_normal((s, s)) / np.sqrt(s)
c = rng.standard_normal((d, s))

x = solve_sylvester(a, b, c)
x_kron = kronecker_oracle(a, b, c)
print("max difference from the vectorized solve:", np.abs(x - x_kron).max())
print("residual:", np.linalg.norm(a @ x @ b + x - c))

# Inside the solver B is Y Y^T, which never changes, so its Schur factors are
# computed once and reused every iteration. With that reuse the per-solve
# cost grows gently in s, while the vectorized system grows like (d s)^3.

for s in (40, 150):
    b = rng.standard_normal((s, s)) / np.sqrt(s)
    c = rng.standard_normal((d, s))
    fac = sylvester_b_factors(b)
    t0 = time.perf_counter()
    solve_sylvester(a, b, c, b_factors=fac)
    t1 = time.perf_counter()
    kronecker_oracle(a, b, c, max_size=d * s)
    t2 = time.perf_counter()
    print(f"s={s:<4} Hessenberg-Schur {1e3 * (t1 - t0):7.1f} ms   vectorized {1e3 * (t2 - t1):7.1f} ms")


# # Sparse-group shrinkage
#
# The proximal map of  lam ||u||_2 + mu ||u||_1  first soft-thresholds each
# entry by mu/rho, then shrinks the whole vector toward zero by lam/rho.
# Small columns vanish entirely.

# In[4]:

v = np.array([1.2, -0.4, 0.05, 0.8])
for lam, mu in [(0.0, 0.0), (0.0, 0.3), (0.5, 0.0), (0.5, 0.3), (2.0, 0.3)]:
    u = sparse_group_prox(v, ProxParams(lam, mu, rho=1.0)) + 0.0  # drop negative zeros
    print(f"lam={lam:<4} mu={mu:<4} -> {u}")
