"""
Rogue clients
=============

A rogue client sends the complement of its honest vote.  The median
survives as long as honest voters stay in the majority on every
coordinate; with fixed local sample sizes, raising the rogue fraction
towards one half eventually breaks it.
"""

from fedsupport import AdversaryConfig, DeltaPolicy, RoundConfig, choose_lambda, make_ground_truth, make_profiles, min_samples, simulate_round, window_independent

n = min_samples(3, DeltaPolicy.raw(0.12), beta=0.28)
print(f"samples per client: {n}")
for beta in (0.0, 0.2, 0.28, 0.36, 0.45):
    exact = 0
    for seed in range(30):
        gt = make_ground_truth(200, 3, seed=seed, signs="random")
        profiles = make_profiles(gt, 25, n, master_seed=seed)
        lam = choose_lambda(window_independent(gt, profiles, DeltaPolicy.raw(1e-6)))
        cfg = RoundConfig(25, adversary=AdversaryConfig(beta))
        exact += simulate_round(gt, profiles, lam, cfg, seed).exact(gt.support)
    print(f"beta={beta:.2f}  rogues={int(beta * 25):2d}  exact recovery {exact}/30")
