"""
Phase transitions
=================

Exact recovery as a function of the per-client sample size (left) and of
the number of clients (right).  Writes tidy CSV next to this script; plot
with any tool.
"""

from pathlib import Path

from fedsupport.experiments import SweepSpec, run_clients_sweep, run_samples_sweep

here = Path(__file__).parent
samples = run_samples_sweep(SweepSpec("samples", [500, 1000, 2000], [3], runs=30))
samples.to_csv(here / "sweep_samples.csv")
for d in (500, 1000, 2000):
    C, rate = samples.curve(d, 3)
    print(f"d={d:<5}", " ".join(f"{r:.2f}" for r in rate))

clients = run_clients_sweep(SweepSpec("clients", [1000], [10], runs=30))
clients.to_csv(here / "sweep_clients.csv")
for row in clients.rows:
    print(f"C={row.C:+.1f}  g={row.g:<3} rate={row.recovery_rate:.2f}")
