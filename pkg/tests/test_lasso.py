import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsupport import ConfigurationError, LassoProblem, centralized_support, compute_moments, make_ground_truth, soft_threshold_estimate, solve_lasso
from fedsupport.lasso import PENALTY_PER_LAMBDA, lasso_objective


def orthogonal_design(rng, n, d):
    Q, _ = np.linalg.qr(rng.normal(size=(n, d)))
    return Q * rng.uniform(0.5, 3.0, size=d) * np.sqrt(n)


def test_large_penalty_gives_zero():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(30, 5)), rng.normal(size=30)
    _, alpha = compute_moments(X, y)
    res = solve_lasso(LassoProblem(X, y, 2 * np.abs(alpha).max()))
    np.testing.assert_array_equal(res.w, 0.0)
    assert res.converged and res.sweeps == 1


def test_hand_instance_matches_client_form():
    X = np.array([[2.0], [2.0]])
    y = np.array([4.0, 4.0])
    res = solve_lasso(LassoProblem(X, y, 2.0))
    assert res.w[0] == pytest.approx(7 / 4)


def test_orthogonal_closed_form():
    rng = np.random.default_rng(1)
    X = orthogonal_design(rng, 40, 6)
    y = rng.normal(size=40) * 3
    sigma, alpha = compute_moments(X, y)
    lam = 0.4
    res = solve_lasso(LassoProblem(X, y, PENALTY_PER_LAMBDA * lam))
    expected = np.sign(alpha) * np.maximum(0, np.abs(alpha) - lam) / sigma
    np.testing.assert_allclose(res.w, expected, atol=1e-10)


def test_objective_never_increases():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 8))
    X[:, 1] = X[:, 0] + 0.1 * rng.normal(size=50)
    y = X @ rng.normal(size=8) + rng.normal(size=50)
    res = solve_lasso(LassoProblem(X, y, 0.1), record_objective=True)
    obj = np.array(res.objective)
    assert np.all(np.diff(obj) <= 1e-12 * np.abs(obj[:-1]).max())
    assert res.objective[-1] == pytest.approx(lasso_objective(X, y, res.w, 0.1))


def test_scale_consistency():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(60, 5))
    y = X @ np.array([1.0, 0, -2, 0, 0.5]) + 0.1 * rng.normal(size=60)
    base = solve_lasso(LassoProblem(X, y, 0.3, tol=1e-12))
    scaled = solve_lasso(LassoProblem(X, 4 * y, 1.2, tol=1e-12))
    np.testing.assert_allclose(scaled.w, 4 * base.w, atol=1e-9)


def test_non_convergence_is_reported():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(20, 10))
    X[:, 1] = X[:, 0] * 1.0001
    y = rng.normal(size=20)
    res = solve_lasso(LassoProblem(X, y, 1e-4, max_sweeps=2))
    assert not res.converged and res.sweeps == 2
    with pytest.warns(RuntimeWarning):
        out = centralized_support(X, y, 1e-4, max_sweeps=2)
    assert not out.converged


def test_invalid_problems():
    with pytest.raises(ConfigurationError):
        LassoProblem(np.ones((3, 2)), np.ones(3), 0.0)
    with pytest.raises(ConfigurationError):
        LassoProblem(np.ones((3, 2)), np.ones(4), 1.0)


def test_pooled_orthogonal_noiseless_support():
    rng = np.random.default_rng(5)
    X = orthogonal_design(rng, 60, 8)
    w = np.zeros(8)
    w[[1, 4]] = [1.5, -0.8]
    y = X @ w
    sigma, alpha = compute_moments(X, y)
    lam = 0.5 * np.abs(alpha[[1, 4]]).min()
    out = centralized_support(X, y, PENALTY_PER_LAMBDA * lam)
    assert out.support == {1, 4}
    assert centralized_support(X, y, 1e6).support == frozenset()


def test_synthetic_pooled_support():
    gt = make_ground_truth(20, 3, seed=11)
    rng = np.random.default_rng(11)
    X = rng.normal(size=(2000, 20))
    y = X @ gt.w_star + 0.3 * rng.normal(size=2000)
    assert centralized_support(X, y, 0.1).support == gt.support


def test_standardize_keeps_support_scale_free():
    gt = make_ground_truth(10, 2, seed=2)
    rng = np.random.default_rng(2)
    X = rng.normal(size=(1000, 10))
    y = X @ gt.w_star + 0.1 * rng.normal(size=1000)
    plain = centralized_support(X, y, 0.1)
    wide = centralized_support(X * 50.0, y, 0.1, standardize=True)
    assert plain.support == wide.support == gt.support


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10_000), lam=st.floats(0.05, 2.0))
def test_orthogonal_agreement_property(seed, lam):
    rng = np.random.default_rng(seed)
    n, d = 25, 5
    X = orthogonal_design(rng, n, d)
    y = rng.normal(size=n) * 2
    sigma, alpha = compute_moments(X, y)
    est = soft_threshold_estimate(sigma, alpha, lam)
    res = solve_lasso(LassoProblem(X, y, 2 * lam, tol=1e-12))
    np.testing.assert_allclose(res.w, est.w_hat, atol=1e-8)
