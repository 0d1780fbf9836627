import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fedsupport import ConfigurationError, SupportVote, compute_moments, emit_vote, run_client, soft_threshold_estimate


def test_moments_two_sample_hand_case():
    X = np.array([[2.0, 0.0], [2.0, 0.0]])
    sigma, alpha = compute_moments(X, np.array([4.0, 4.0]))
    np.testing.assert_array_equal(sigma, [4.0, 0.0])
    np.testing.assert_array_equal(alpha, [8.0, 0.0])


def test_moments_single_sample():
    sigma, alpha = compute_moments(np.array([[1.0, 1.0]]), np.array([3.0]))
    np.testing.assert_array_equal(sigma, [1.0, 1.0])
    np.testing.assert_array_equal(alpha, [3.0, 3.0])


def test_zero_response_gives_zero_alpha():
    X = np.random.default_rng(0).normal(size=(7, 4))
    _, alpha = compute_moments(X, np.zeros(7))
    np.testing.assert_array_equal(alpha, 0.0)


def test_soft_threshold_hand_values():
    est = soft_threshold_estimate(np.array([4.0, 0.0]), np.array([8.0, 0.0]), 1.0)
    np.testing.assert_allclose(est.w_hat, [7 / 4, 0.0])
    est = soft_threshold_estimate(np.array([2.0]), np.array([-5.0]), 1.0)
    np.testing.assert_allclose(est.w_hat, [-2.0])


def test_alpha_exactly_at_lambda_is_zero():
    est = soft_threshold_estimate(np.array([1.0, 3.0]), np.array([0.5, -0.5]), 0.5)
    np.testing.assert_array_equal(est.w_hat, 0.0)


@pytest.mark.parametrize("lam", [0.0, -1.0])
def test_nonpositive_lambda_rejected(lam):
    with pytest.raises(ConfigurationError):
        soft_threshold_estimate(np.ones(2), np.ones(2), lam)


def test_vote_bits():
    est = soft_threshold_estimate(np.ones(5), np.array([0.0, 2.0, 0.0, -3.0, 0.0]), 1.0)
    assert str(emit_vote(est, 0)) == "01010"
    est = soft_threshold_estimate(np.ones(3), np.zeros(3), 1.0)
    assert str(emit_vote(est, 0)) == "000"


def test_run_client_composes():
    X = np.array([[2.0, 0.0], [2.0, 0.0]])
    y = np.array([4.0, 4.0])
    assert str(run_client((X, y), 1.0, client_id=3)) == "10"
    assert run_client((X, y), 9.0, client_id=3).as_array().sum() == 0


def test_noiseless_single_feature_recovers_support():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(4000, 3))
    y = 1.0 * X[:, 1]
    # window for this instance is (0, 1) up to sampling error
    assert str(run_client((X, y), 0.5)) == "010"


def test_vote_complement_and_roundtrip():
    v = SupportVote.from_array(4, [1, 0, 1, 1])
    assert str(v.complement()) == "0100"
    assert v.complement().complement() == v
    assert v.d == 4


@settings(max_examples=200, deadline=None)
@given(
    sigma=arrays(np.float64, 6, elements=st.floats(0.01, 10)),
    alpha=arrays(np.float64, 6, elements=st.floats(-10, 10)),
    lam=st.floats(0.01, 5),
)
def test_vote_is_strict_threshold_on_alpha(sigma, alpha, lam):
    est = soft_threshold_estimate(sigma, alpha, lam)
    np.testing.assert_array_equal(emit_vote(est, 0).as_array(), (np.abs(alpha) > lam).astype(np.uint8))
    # sign is preserved and magnitude shrinks by exactly lam/sigma
    nz = est.w_hat != 0
    np.testing.assert_array_equal(np.sign(est.w_hat[nz]), np.sign(alpha[nz]))
    np.testing.assert_allclose(np.abs(est.w_hat[nz]) * sigma[nz], np.abs(alpha[nz]) - lam, rtol=1e-12, atol=1e-12)
