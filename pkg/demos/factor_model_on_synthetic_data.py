# coding: utf-8

# # Fitting the news factor model to data it could have generated
#
# The model says tomorrow's log returns are a nonnegative mix of d latent
# factors, and each factor is a sparse linear reaction to today's word
# intensities:  r_hat = U W y  with U >= 0.
#
# Before pointing it at real prices it helps to watch it work on data drawn
# from the model itself, where the right answer is known.

# In[1]:

import numpy as np

from newsfactor import SolverConfig, closest_stocks, directional_accuracy, fit, objective, predict_returns
from newsfactor.admm import init_state, lambda_max
from newsfactor.data import generate_synthetic

np.set_printoptions(precision=3, suppress=True)

# 20 stocks, 30 words, 50 days, 3 factors. 80% of the words carry no signal,
# so 24 of the 30 columns of the true W are zero.

data = generate_synthetic(20, 30, 50, 3, sparsity=0.8, seed=0)
print("returns", data.r.shape, " intensities", data.y.shape)
print("words that matter:", np.flatnonzero(data.model.w.any(axis=0)))


# # Fitting
#
# `fit` runs the ADMM solver. The defaults (rho=0.1, a light group penalty and
# an even lighter elementwise one) are tuned for returns on the 1% scale.

# In[2]:

cfg = SolverConfig(d=3, max_iters=500)
model, state = fit(data.r, data.y, cfg)

print(f"stopped after {state.iter} iterations, converged={state.converged}")
print(f"objective: start {state.history['objective'][0]:.3e}  end {objective(data.r, data.y, model.u, model.w, cfg):.3e}")

fitted = predict_returns(model, data.y)
print("relative reconstruction error:", np.linalg.norm(fitted - data.r) / np.linalg.norm(data.r))

# The factorization is only identified up to scaling and permutation of the
# factors, so comparing U to the true U entry by entry is meaningless. What is
# identified is the product UW, and with it the predicted directions.

print("sign agreement on the training days:", directional_accuracy(fitted, data.r))


# ## Which words did it pick?
#
# The group penalty zeroes whole columns of W. Words whose column survives are
# the ones the model reacts to.

# In[3]:

picked = np.flatnonzero(np.abs(model.w).max(axis=0) > 1e-3 * np.abs(model.w).max())
print("words with non-negligible weight:", picked)


# # Turning the penalty up
#
# `lambda_max` is the smallest group weight at which W = 0 already satisfies
# the optimality conditions. Sweeping toward it shows the selection path.

# In[4]:

top = lambda_max(data.r, data.y, init_state(20, 30, cfg).u, cfg.mu)
for scale in np.logspace(-3, 0.3, 5):
    m, _ = fit(data.r, data.y, SolverConfig(d=3, lam=float(top * scale), max_iters=500))
    print(f"lambda = {top * scale:9.3e}   nonzero columns = {np.count_nonzero(m.w.any(axis=0))}")


# # Adding noise and predicting forward
#
# Real returns are mostly noise. Here the noise has half the spread of the
# signal; the model trains on 50 days and predicts 10 it has not seen.

# In[5]:

clean = generate_synthetic(20, 30, 60, 3, seed=1)
sigma = 0.5 * clean.r[:, :50].std()
noisy = generate_synthetic(20, 30, 60, 3, seed=1, noise_sigma=sigma)

m, _ = fit(noisy.r[:, :50], noisy.y[:, :50], cfg)
print("held-out directional accuracy:", directional_accuracy(predict_returns(m, noisy.y[:, 50:]), noisy.r[:, 50:]))


# # Stocks that move together
#
# Rows of U say how strongly each stock loads on each factor. Stocks with
# similar rows react to the same news, which is what `closest_stocks` ranks.

# In[6]:

for i in (0, 1, 2):
    print(f"S{i:03d}  U row {model.u[i]}  closest: {closest_stocks(model, i, 3)}")
