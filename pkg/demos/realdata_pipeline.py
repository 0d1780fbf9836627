"""
Federated versus pooled support on a table
==========================================

Split a ``y,x1,...,xd`` table into many small clients, vote with a manual
lambda, and score the result against the lasso fitted to the pooled data.
A synthetic table stands in for a real one; pass a CSV path to use yours.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from fedsupport.experiments import run_realdata_pipeline

if len(sys.argv) > 1:
    path = Path(sys.argv[1])
else:
    rng = np.random.default_rng(0)
    n, d = 20_000, 40
    X = rng.normal(size=(n, d))
    X[:, [3, 17]] = 0.0  # empty columns are dropped
    w = np.zeros(d)
    w[rng.choice(d, 6, replace=False)] = rng.uniform(0.3, 1.0, 6)
    y = X @ w + 0.5 * rng.normal(size=n)
    path = Path(tempfile.mkdtemp()) / "table.csv"
    header = "y," + ",".join(f"x{j + 1}" for j in range(d))
    np.savetxt(path, np.column_stack([y, X]), delimiter=",", header=header, comments="")

for clients, per_client in [(190, 100), (19, 1000)]:
    out = run_realdata_pipeline(path, clients, per_client, lam=0.08, penalty=0.16, seed=1)
    r = out.report
    print(
        f"{clients} clients x {per_client}: federated {len(r.support)}, pooled {len(out.centralized.support)}, "
        f"recall {r.recall:.3f}, precision {r.precision:.3f}, f1 {r.f1:.3f}, dropped {out.dropped_columns}"
    )
