"""Helpers shared by the unit tests and the acceptance suite."""
import csv
import math
from fractions import Fraction as F

import numpy as np

from newsfactor.admm import AdmmState, SolverConfig
from newsfactor.cli import main
from newsfactor.data import generate_synthetic_corpus, write_counts_csv, write_prices_csv
from newsfactor.prox import ProxParams
from oracles import lagrangian


def random_problem(seed, n=5, m=6, s=8, d=3, lam=0.3, mu=0.1, rho=0.7):
    rng = np.random.default_rng(seed)
    r = rng.standard_normal((n, s))
    y = rng.random((m, s)) * (rng.random((m, s)) < 0.5)
    cfg = SolverConfig(d=d, lam=lam, mu=mu, rho=rho)
    state = AdmmState(
        a=rng.standard_normal((n, d)), b=rng.standard_normal((d, m)),
        u=rng.random((n, d)), w=rng.standard_normal((d, m)),
        c=rng.standard_normal((n, d)), d_dual=rng.standard_normal((d, m)),
    )
    return r, y, cfg, state


def lag(state, r, y, cfg, **over):
    parts = dict(a=state.a, b=state.b, u=state.u, w=state.w, c=state.c, dd=state.d_dual)
    parts.update(over)
    return lagrangian(parts["a"], parts["b"], parts["u"], parts["w"], parts["c"], parts["dd"], r, y,
                      cfg.lam, cfg.mu, cfg.rho)


def certificate(u, v, p: ProxParams):
    """Largest violation of 0 in the subdifferential at ``u``."""
    norm = np.linalg.norm(u)
    if norm == 0:
        w = p.rho * np.sign(v) * np.maximum(np.abs(v) - p.mu / p.rho, 0)
        return max(0.0, np.linalg.norm(w) - p.lam)
    nz = u != 0
    g = p.lam * u[nz] / norm + p.mu * np.sign(u[nz]) + p.rho * (u[nz] - v[nz])
    # zero coordinates: |rho v_i - lam * 0| must be absorbed by mu
    z = ~nz
    slack = np.maximum(np.abs(p.rho * v[z]) - p.mu, 0.0)
    return max(np.abs(g).max(initial=0.0), slack.max(initial=0.0))


def simulate_ar(coef, intercept, T, sigma, seed, start_scale=5.0):
    """AR series started far from its mean so the transient excites every lag."""
    rng = np.random.default_rng(seed)
    p = len(coef)
    x = np.zeros(T)
    x[:p] = start_scale * rng.standard_normal(p)
    for t in range(p, T):
        x[t] = intercept + coef @ x[t - p:t][::-1] + sigma * rng.standard_normal()
    return x


def stable_coefficients(roots):
    return -np.real(np.poly(roots))[1:]


AR10_ROOTS = np.concatenate([
    0.9 * np.exp(1j * np.array([0.3, 1.0, 1.7, 2.4])),
    0.9 * np.exp(-1j * np.array([0.3, 1.0, 1.7, 2.4])),
    [0.7, -0.6],
])


# Five trading days, two stocks.
OPEN = np.array([[10.0, 11.0, 12.0, 10.0, 10.0],
                 [20.0, 20.0, 22.0, 21.0, 20.0]])
CLOSE = np.array([[11.0, 12.0, 10.0, 10.0, 12.0],
                  [20.0, 22.0, 21.0, 20.0, 25.0]])
UP = np.array([[True, True, False, False, True],
               [False, True, False, True, True]])
REFERENCE = [F(1, 100), F(0), F(-1, 100), F(2, 100), F(0)]


def hand_fixture():
    """Everything for the five-day fixture in exact rational arithmetic."""
    mult = [
        F(11, 10),                                # A only
        (F(12, 11) + F(22, 20)) / 2,              # both
        F(1),                                     # cash
        F(20, 21),                                # B only
        (F(12, 10) + F(25, 20)) / 2,              # both
    ]
    values = [F(1)]
    for m in mult:
        values.append(values[-1] * m)
    rets = [m - 1 for m in mult]
    peak, dd = values[0], F(0)
    for v in values:
        peak = max(peak, v)
        dd = max(dd, (peak - v) / peak)
    excess = [r - q for r, q in zip(rets, REFERENCE)]
    mean = sum(excess) / 5
    var = sum((e - mean) ** 2 for e in excess) / 4
    return {
        "values": values,
        "return": values[-1] / values[0],
        "worst_day": min(rets),
        "max_drawdown": dd,
        "cvar": min(rets),  # ceil(0.05 * 5) = 1 worst day
        "sharpe": float(mean) / math.sqrt(float(var)),
    }


WINDOW = 30
SPLIT = "100,120"


def write_corpus(directory, seed=0, n=8, m=10, s=150, noise=0.002):
    directory.mkdir(parents=True, exist_ok=True)
    corpus = generate_synthetic_corpus(n, m, s, 2, seed=seed, window=WINDOW, noise_sigma=noise)
    write_prices_csv(corpus.prices, directory / "prices.csv")
    write_counts_csv(corpus.counts, directory / "counts.csv")
    closes = np.nanmean(corpus.prices.close, axis=0)
    with open(directory / "reference.csv", "w") as fh:
        fh.write("date,value\n")
        for date, v in zip(corpus.prices.dates, closes):
            fh.write(f"{date},{float(v)!r}\n")
    return corpus


def args(src, out, *extra):
    return ["--prices", str(src / "prices.csv"), "--counts", str(src / "counts.csv"),
            "--reference", str(src / "reference.csv"), "--out", str(out), "--window", str(WINDOW),
            "--split", SPLIT, "--d", "2", "--max-iters", "200", *extra]


def run_all(src, out, *extra):
    for cmd in ("prepare", "train", "predict", "backtest", "report"):
        assert main([cmd, *args(src, out, *extra)]) == 0, cmd


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
