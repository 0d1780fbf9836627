"""
Where lambda may live
=====================

With oracle knowledge of w* and each client's scales, the threshold has a
window: large enough to silence every non-support coordinate, small
enough to keep every support coordinate.  The window narrows as the
concentration slack delta grows, and the per-client sample bound grows
as delta shrinks.
"""

from fedsupport import DeltaPolicy, GroundTruth, make_profiles, min_samples, window_independent
from fedsupport.synthdata import ClientProfile, Family, independent_covariance

gt = GroundTruth.from_vector([1.0])
client = ClientProfile(0, 10, 1.0, 1.0, Family.GAUSSIAN, independent_covariance(1, 1.0), 0)
w = window_independent(gt, [client], DeltaPolicy.raw(0.01))
print(f"single coordinate, delta=0.01: ({w.lo:.2f}, {w.hi:.2f})")

gt = GroundTruth.from_vector([0.0, 1.2, 0.0, -0.7, 0.0, 0.9])
profiles = make_profiles(gt, 4, 100, rho_range=(0.8, 1.2), eta_range=(0.2, 0.5), master_seed=3)
print(f"{'delta':>8} {'lo':>8} {'hi':>8} {'feasible':>9} {'min n':>8}")
for delta in (0.001, 0.005, 0.01, 0.02, 0.04):
    pol = DeltaPolicy.raw(delta)
    w = window_independent(gt, profiles, pol)
    n = min_samples(gt.s, pol)
    print(f"{delta:8.3f} {w.lo:8.4f} {w.hi:8.4f} {str(w.feasible):>9} {n:8d}")
print("binding client/coordinate for the upper edge:", w.hi_binding)
