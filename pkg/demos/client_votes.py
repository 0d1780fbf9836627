"""
One client, one vote
====================

Each client reduces its local samples to two moment vectors, thresholds
them, and keeps only the sign pattern: one bit per coordinate.
"""

import numpy as np

from fedsupport import compute_moments, make_ground_truth, make_profiles, run_client, sample_client_dataset, soft_threshold_estimate

# A hand-sized case first: two samples, two features.
X = np.array([[2.0, 0.0], [2.0, 0.0]])
y = np.array([4.0, 4.0])
sigma, alpha = compute_moments(X, y)
print("sigma_hat", sigma, "alpha_hat", alpha)
est = soft_threshold_estimate(sigma, alpha, lam=1.0)
print("w_hat", est.w_hat, "-> vote", run_client((X, y), 1.0))

# A synthetic client: 50 features, 3 of them active.
gt = make_ground_truth(50, 3, seed=1, signs="positive")
(profile,) = make_profiles(gt, 1, 400, eta_range=(0.3, 0.3), master_seed=1)
data = sample_client_dataset(gt, profile)
vote = run_client(data, lam=0.25, client_id=0)
print("true support ", sorted(gt.support))
print("client votes ", np.flatnonzero(vote.as_array()).tolist())
print("bits on the wire:", vote.d)
