"""Phase-transition sweeps and the real-data pipeline.

Two sweeps, each averaged over seeded runs with exact support recovery
(``S == S*``) as the 0/1 outcome:

* samples sweep: ``g = ceil(g_mult * ln d)`` clients, ``n = ceil(10^C s^2 ln s)``
  samples per client;
* clients sweep: ``n = max(30, ceil(s^2 ln s))`` samples per client,
  ``g = ceil(10^C ln d)`` clients.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .aggregate import RecoveryReport, decide_support, score_against, tally_votes
from .client import run_client
from .errors import ConfigurationError
from .fednet import RoundConfig, simulate_round
from .lasso import CentralizedSupport, centralized_support
from .synthdata import Family, Regime, derive_seed, load_client_csv, make_ground_truth, make_profiles
from .window import DeltaPolicy, choose_lambda, window_correlated, window_independent

__all__ = [
    "SweepSpec",
    "SweepRow",
    "SweepResult",
    "CSV_COLUMNS",
    "default_c_grid",
    "samples_per_client",
    "clients_for_c",
    "run_trial",
    "run_samples_sweep",
    "run_clients_sweep",
    "partition_rows",
    "RealDataOutcome",
    "run_realdata_pipeline",
]

CSV_COLUMNS = (
    "mode",
    "d",
    "s",
    "C",
    "g",
    "n_per_client",
    "runs",
    "recovery_rate",
    "lambda_lo",
    "lambda_hi",
    "feasible",
)

_MODE_KEY = {"samples": 1, "clients": 2}


def default_c_grid(lo: float = -0.8, hi: float = 0.8, step: float = 0.2) -> list[float]:
    k = int(round((hi - lo) / step))
    return [round(lo + i * step, 10) for i in range(k + 1)]


@dataclass
class SweepSpec:
    mode: str  # "samples" or "clients"
    d_values: Sequence[int]
    s_values: Sequence[int]
    # None: -0.8..0.8 for the samples sweep, -1.0..0.6 for the clients sweep
    c_grid: Sequence[float] | None = None
    runs: int = 30
    regime: Regime = Regime.CORRELATED
    g_mult: float = 2.0
    min_samples: int = 30
    log_base: float = math.e
    master_seed: int = 0
    magnitude_range: tuple[float, float] = (0.5, 1.5)
    signs: str = "positive"
    rho_range: tuple[float, float] = (0.9, 1.1)
    # None: (0.3, 0.7) for the samples sweep, (5, 7) for the clients sweep
    eta_range: tuple[float, float] | None = None
    families: Sequence[Family] = tuple(Family)
    ss_frac: float = 0.3
    sn_frac: float = 0.1
    nn_frac: float | None = None
    jitter: float = 0.2
    delta: DeltaPolicy = field(default_factory=lambda: DeltaPolicy.correlated_scaled(1e-3))
    workers: int = 1

    def __post_init__(self):
        if self.mode not in _MODE_KEY:
            raise ConfigurationError(f"mode must be 'samples' or 'clients', got {self.mode!r}")
        if self.runs < 1:
            raise ConfigurationError("runs must be >= 1")
        if self.c_grid is None:
            self.c_grid = default_c_grid() if self.mode == "samples" else default_c_grid(-1.0, 0.6)
        if not (self.d_values and self.s_values and self.c_grid):
            raise ConfigurationError("sweep grids must be non-empty")
        self.regime = Regime(self.regime)
        if self.eta_range is None:
            self.eta_range = (0.3, 0.7) if self.mode == "samples" else (5.0, 7.0)

    @property
    def n_rule(self) -> str:
        if self.mode == "samples":
            return "n = ceil(10^C * s^2 * log s)"
        return f"n = max({self.min_samples}, ceil(s^2 * log s))"

    def log(self, x: float) -> float:
        return math.log(x) / math.log(self.log_base)


def samples_per_client(spec: SweepSpec, s: int, C: float) -> int:
    base = max(s * s * spec.log(s), 1.0)
    if spec.mode == "samples":
        return max(1, math.ceil(10**C * base))
    return max(spec.min_samples, math.ceil(base))


def clients_for_c(spec: SweepSpec, d: int, C: float) -> int:
    if spec.mode == "samples":
        return max(1, math.ceil(spec.g_mult * spec.log(d)))
    return max(1, math.ceil(10**C * spec.log(d)))


@dataclass
class SweepRow:
    mode: str
    d: int
    s: int
    C: float
    g: int
    n_per_client: int
    runs: int
    recovery_rate: float
    lambda_lo: float
    lambda_hi: float
    feasible: bool

    def as_csv(self) -> list[str]:
        return [
            self.mode,
            str(self.d),
            str(self.s),
            repr(float(self.C)),
            str(self.g),
            str(self.n_per_client),
            str(self.runs),
            repr(float(self.recovery_rate)),
            repr(float(self.lambda_lo)),
            repr(float(self.lambda_hi)),
            "true" if self.feasible else "false",
        ]


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow(row.as_csv())
        text = buf.getvalue()
        if path is not None:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            Path(path).write_text(text)
        return text

    def curve(self, d: int | None = None, s: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """``(C, recovery_rate)`` for one (d, s) curve, ordered by C."""
        rows = [r for r in self.rows if (d is None or r.d == d) and (s is None or r.s == s)]
        return np.array([r.C for r in rows]), np.array([r.recovery_rate for r in rows])


def run_trial(spec: SweepSpec, d: int, s: int, g: int, n: int, seed: int) -> tuple[bool, float, float, bool]:
    """One seeded run: fresh ``w*`` and client data, oracle lambda, one round.

    Returns ``(exact, lambda_lo, lambda_hi, feasible)``.  An infeasible
    window counts as a failed recovery.
    """
    gt = make_ground_truth(d, s, spec.magnitude_range, seed=seed, signs=spec.signs)
    profiles = make_profiles(
        gt,
        g,
        n,
        regime=spec.regime,
        rho_range=spec.rho_range,
        eta_range=spec.eta_range,
        families=spec.families,
        ss_frac=spec.ss_frac,
        sn_frac=spec.sn_frac,
        nn_frac=spec.nn_frac,
        jitter=spec.jitter,
        master_seed=seed,
    )
    if spec.regime is Regime.CORRELATED:
        window = window_correlated(gt, profiles, spec.delta)
    else:
        window = window_independent(gt, profiles, spec.delta)
    if not window.feasible:
        return False, window.lo, window.hi, False
    lam = choose_lambda(window, "midpoint")
    report = simulate_round(gt, profiles, lam, RoundConfig.honest(g), seed)
    return report.exact(gt.support), window.lo, window.hi, True


def _grid_point(args):
    spec, d, s, ci, C = args
    g = clients_for_c(spec, d, C)
    n = samples_per_client(spec, s, C)
    outcomes = [
        run_trial(spec, d, s, g, n, derive_seed(spec.master_seed, _MODE_KEY[spec.mode], d, s, ci, run))
        for run in range(spec.runs)
    ]
    exact = sum(o[0] for o in outcomes)
    return SweepRow(
        mode=spec.mode,
        d=d,
        s=s,
        C=float(C),
        g=g,
        n_per_client=n,
        runs=spec.runs,
        recovery_rate=exact / spec.runs,
        lambda_lo=float(np.mean([o[1] for o in outcomes])),
        lambda_hi=float(np.mean([o[2] for o in outcomes])),
        feasible=all(o[3] for o in outcomes),
    )


def _run_sweep(spec: SweepSpec) -> SweepResult:
    jobs = [(spec, int(d), int(s), ci, C) for d in spec.d_values for s in spec.s_values for ci, C in enumerate(spec.c_grid)]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            rows = list(pool.map(_grid_point, jobs))
    else:
        rows = [_grid_point(j) for j in jobs]
    return SweepResult(spec, rows)


def run_samples_sweep(spec: SweepSpec) -> SweepResult:
    if spec.mode != "samples":
        raise ConfigurationError("run_samples_sweep needs mode='samples'")
    return _run_sweep(spec)


def run_clients_sweep(spec: SweepSpec) -> SweepResult:
    if spec.mode != "clients":
        raise ConfigurationError("run_clients_sweep needs mode='clients'")
    return _run_sweep(spec)


# ---------------------------------------------------------------- real data


def partition_rows(n_rows: int, clients: int, per_client: int, seed: int = 0) -> list[np.ndarray]:
    """Random split into ``clients`` blocks of ``per_client`` rows; the last
    block also takes every leftover row."""
    if clients < 1 or per_client < 1:
        raise ConfigurationError("clients and per_client must be >= 1")
    if clients * per_client > n_rows:
        raise ConfigurationError(f"{clients} x {per_client} rows requested, table has {n_rows}")
    perm = np.random.default_rng(derive_seed(seed, 5)).permutation(n_rows)
    parts = [perm[k * per_client : (k + 1) * per_client] for k in range(clients - 1)]
    parts.append(perm[(clients - 1) * per_client :])
    return parts


@dataclass(eq=False)
class RealDataOutcome:
    report: RecoveryReport
    centralized: CentralizedSupport
    dropped_columns: list[int]
    client_sizes: list[int]
    lam: float


def run_realdata_pipeline(
    csv_path,
    clients: int,
    per_client: int,
    lam: float,
    penalty: float,
    seed: int = 0,
    standardize: bool = False,
    tol: float = 1e-8,
    max_sweeps: int = 10000,
) -> RealDataOutcome:
    """Federated support on a real table, scored against the pooled lasso support.

    All-zero columns are dropped before anything else; reported indices
    (support, reference, dropped columns) refer to the original columns,
    0-based.
    """
    X, y = load_client_csv(csv_path)
    keep = np.flatnonzero(np.any(X != 0, axis=0))
    dropped = [int(j) for j in np.setdiff1d(np.arange(X.shape[1]), keep)]
    if keep.size == 0:
        raise ConfigurationError("every predictor column is identically zero")
    Xk = X[:, keep]
    if standardize:
        scale = np.sqrt(np.mean(Xk**2, axis=0))
        Xk = Xk / scale
    central = centralized_support(Xk, y, penalty, tol=tol, max_sweeps=max_sweeps)
    parts = partition_rows(X.shape[0], clients, per_client, seed)
    votes = [run_client((Xk[idx], y[idx]), lam, cid) for cid, idx in enumerate(parts)]
    local = decide_support(tally_votes(votes, Xk.shape[1]))
    fractions = np.zeros(X.shape[1])
    fractions[keep] = local.fractions
    report = RecoveryReport(
        support=frozenset(int(keep[j]) for j in local.support),
        fractions=fractions,
        g_used=local.g_used,
    )
    w_full = np.zeros(X.shape[1])
    w_full[keep] = central.w / scale if standardize else central.w
    central = CentralizedSupport(
        support=frozenset(int(keep[j]) for j in central.support),
        w=w_full,
        converged=central.converged,
        sweeps=central.sweeps,
    )
    report = score_against(report, central.support)
    if not central.converged:
        report = replace(report, flags=report.flags + ("centralized_not_converged",))
    return RealDataOutcome(
        report=report,
        centralized=central,
        dropped_columns=dropped,
        client_sizes=[int(p.size) for p in parts],
        lam=float(lam),
    )
