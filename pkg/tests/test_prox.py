import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from newsfactor.prox import ProxParams, nonneg_project, sparse_group_prox, sparse_group_prox_columns
from oracles import prox_objective, subgradient_prox
from support import certificate


def test_params_validation():
    with pytest.raises(ValueError):
        ProxParams(-1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        ProxParams(0.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        ProxParams(0.0, 0.0, 0.0)


def test_no_penalty_is_identity():
    v = np.array([1.5, -2.0, 0.3])
    assert np.array_equal(sparse_group_prox(v, ProxParams(0.0, 0.0, 1.0)), v)


def test_below_lasso_threshold_is_zero():
    v = np.array([0.4, -0.5, 0.1])
    assert np.array_equal(sparse_group_prox(v, ProxParams(0.3, 1.0, 2.0)), np.zeros(3))


def test_hand_example_against_subgradient_oracle():
    v = np.array([3.0, -1.0])
    p = ProxParams(1.0, 1.0, 1.0)
    u = sparse_group_prox(v, p)
    # w = (2, 0); scale (2 - 1) / 2
    assert np.allclose(u, [1.0, 0.0])
    oracle = subgradient_prox(v[None, :], 1.0, 1.0, 1.0)[0]
    assert np.abs(u - oracle).max() <= 1e-4


def test_zero_input():
    assert np.array_equal(sparse_group_prox(np.zeros(4), ProxParams(1.0, 1.0, 1.0)), np.zeros(4))


def test_columns_match_single_vector():
    rng = np.random.default_rng(0)
    v = rng.standard_normal((5, 7))
    p = ProxParams(0.7, 0.2, 1.3)
    cols = sparse_group_prox_columns(v, p)
    for j in range(7):
        assert np.allclose(cols[:, j], sparse_group_prox(v[:, j], p))


@settings(max_examples=200, deadline=None)
@given(
    arrays(np.float64, st.integers(1, 20), elements=st.floats(-10, 10)),
    st.floats(0, 5), st.floats(0, 5), st.floats(0.05, 10),
)
def test_optimality_certificate(v, lam, mu, rho):
    p = ProxParams(lam, mu, rho)
    u = sparse_group_prox(v, p)
    assert certificate(u, v, p) <= 1e-8 * max(1.0, rho * np.abs(v).max())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_beats_random_probes(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 15))
    v = rng.standard_normal(k) * 3
    lam, mu, rho = rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0.1, 4)
    u = sparse_group_prox(v, ProxParams(lam, mu, rho))
    best = prox_objective(u, v, lam, mu, rho)
    probes = u + rng.standard_normal((1000, k)) * rng.choice([1e-3, 1e-1, 1.0], (1000, 1))
    values = [prox_objective(z, v, lam, mu, rho) for z in probes]
    assert best <= min(values) + 1e-8


def test_nonneg_project_examples():
    a = np.array([[1.0, 2.0], [0.0, 3.0]])
    assert np.array_equal(nonneg_project(a), a)
    assert np.array_equal(nonneg_project(-a - 1), np.zeros((2, 2)))
    assert np.array_equal(nonneg_project(np.array([[-1.0, 2.0], [0.0, -3.0]])), [[0.0, 2.0], [0.0, 0.0]])


@given(arrays(np.float64, (3, 4), elements=st.floats(-1e6, 1e6)))
def test_nonneg_project_idempotent(a):
    once = nonneg_project(a)
    assert np.all(once >= 0)
    assert np.array_equal(nonneg_project(once), once)
