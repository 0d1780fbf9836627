"""
A round over TCP
================

The same round twice: once in-process, once with a localhost server and
one thread per client sending a framed vote.  One client straggles and is
cut off by the deadline; the reports agree.
"""

import logging

from fedsupport import RoundConfig, make_ground_truth, make_profiles, run_networked_round, simulate_round
from fedsupport.wire import frame_length

logging.basicConfig(level=logging.INFO, format="%(message)s")

gt = make_ground_truth(64, 4, seed=5, signs="positive")
profiles = make_profiles(gt, 6, 500, eta_range=(0.2, 0.4), master_seed=5)
cfg = RoundConfig(6, timeout=1.5, straggler_fraction=0.2)

local = simulate_round(gt, profiles, 0.3, cfg, master_seed=5)
remote = run_networked_round(gt, profiles, 0.3, cfg, master_seed=5)
print("votes used:", remote.g_used, "of", cfg.expected_clients)
print("support   :", sorted(remote.support), "exact:", remote.exact(gt.support))
print("identical to in-process run:", local == remote)
print("bytes per vote:", frame_length(gt.d))
