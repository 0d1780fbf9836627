"""Cyclic coordinate descent for the l1-penalised least-squares problem

    minimise  (1/n) ||X w - y||^2 + penalty * ||w||_1

Note the loss is not halved: each coordinate update thresholds at
``penalty / 2``.  On a design with orthogonal sample columns the solution
therefore equals the client soft-threshold estimate at ``lam = penalty / 2``
(see :data:`PENALTY_PER_LAMBDA`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "PENALTY_PER_LAMBDA",
    "LassoProblem",
    "LassoResult",
    "CentralizedSupport",
    "soft_threshold",
    "lasso_objective",
    "solve_lasso",
    "centralized_support",
]

# penalty that reproduces the client estimate with threshold lam
PENALTY_PER_LAMBDA = 2.0


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


@dataclass(eq=False)
class LassoProblem:
    X: np.ndarray
    y: np.ndarray
    penalty: float
    tol: float = 1e-8
    max_sweeps: int = 10000

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.ndim != 2 or self.X.shape[0] < 1:
            raise ConfigurationError("X must be an n x d matrix with n >= 1")
        if self.y.size != self.X.shape[0]:
            raise ConfigurationError("X and y disagree on n")
        if not self.penalty > 0:
            raise ConfigurationError("penalty must be positive")
        if not self.tol > 0:
            raise ConfigurationError("tol must be positive")
        if self.max_sweeps < 1:
            raise ConfigurationError("max_sweeps must be >= 1")


@dataclass(eq=False)
class LassoResult:
    w: np.ndarray
    sweeps: int
    converged: bool
    objective: list[float] = field(default_factory=list)


def lasso_objective(X, y, w, penalty) -> float:
    r = X @ w - y
    return float(r @ r / X.shape[0] + penalty * np.abs(w).sum())


def solve_lasso(problem: LassoProblem, record_objective: bool = False) -> LassoResult:
    """Cold-started cyclic coordinate descent.

    Works on the Gram matrix ``G = X'X/n`` and ``b = X'y/n``.  Converged when
    one full sweep moves no coordinate by more than ``tol``.  With
    ``record_objective`` the objective after every coordinate update is
    appended to ``result.objective``.
    """
    X, y = problem.X, problem.y
    n, d = X.shape
    G = X.T @ X / n
    b = X.T @ y / n
    diag = np.diag(G).copy()
    half = 0.5 * problem.penalty
    w = np.zeros(d)
    grad = b.copy()  # b - G w, kept in sync with w
    history = [lasso_objective(X, y, w, problem.penalty)] if record_objective else []
    active = diag > 0
    sweeps = 0
    converged = False
    while sweeps < problem.max_sweeps:
        sweeps += 1
        max_step = 0.0
        for j in np.flatnonzero(active):
            old = w[j]
            target = grad[j] + diag[j] * old
            new = soft_threshold(target, half) / diag[j]
            step = new - old
            if step != 0.0:
                w[j] = new
                grad -= G[:, j] * step
                max_step = max(max_step, abs(step))
            if record_objective:
                history.append(lasso_objective(X, y, w, problem.penalty))
        if max_step <= problem.tol:
            converged = True
            break
    return LassoResult(w=w, sweeps=sweeps, converged=converged, objective=history)


@dataclass(eq=False)
class CentralizedSupport:
    support: frozenset
    w: np.ndarray
    converged: bool
    sweeps: int


def centralized_support(
    X,
    y,
    penalty: float,
    tol: float = 1e-8,
    max_sweeps: int = 10000,
    standardize: bool = False,
) -> CentralizedSupport:
    """Support of the pooled lasso fit; ``|w_j| <= tol`` counts as zero.

    With ``standardize`` every column is scaled to unit second moment first
    (support membership is unaffected by the rescaling back).
    """
    X = np.asarray(X, dtype=float)
    if standardize:
        scale = np.sqrt(np.mean(X**2, axis=0))
        scale[scale == 0] = 1.0
        X = X / scale
    res = solve_lasso(LassoProblem(X, y, penalty, tol, max_sweeps))
    if not res.converged:
        warnings.warn(f"lasso did not converge in {res.sweeps} sweeps", RuntimeWarning, stacklevel=2)
    w = res.w / scale if standardize else res.w
    support = frozenset(int(j) for j in np.flatnonzero(np.abs(res.w) > tol))
    return CentralizedSupport(support=support, w=w, converged=res.converged, sweeps=res.sweeps)
