"""Feasible regularisation windows and per-client sample-size bounds.

Given oracle knowledge of ``w*`` and every client's scales and covariance,
compute the interval of lambda for which every honest client votes
correctly with high probability, and the number of samples each client
needs for the median vote to recover the support (optionally with a
fraction ``beta`` of adversarial clients).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InfeasibleWindowError, SampleBoundOverflow
from .synthdata import ClientProfile, GroundTruth, Regime

__all__ = [
    "DeltaPolicy",
    "LambdaWindow",
    "AdversaryConfig",
    "Behavior",
    "LambdaOutsideWindowWarning",
    "window_independent",
    "window_correlated",
    "correlated_scale",
    "min_samples",
    "choose_lambda",
    "clients_for",
]


class Behavior(str, enum.Enum):
    COMPLEMENT = "complement"
    SILENT = "silent"
    RANDOM_BITS = "random_bits"


@dataclass(frozen=True)
class AdversaryConfig:
    beta: float = 0.0
    behavior: Behavior = Behavior.COMPLEMENT

    def __post_init__(self):
        object.__setattr__(self, "behavior", Behavior(self.behavior))
        if not 0 <= self.beta < 0.5:
            raise ConfigurationError(f"rogue fraction beta must be in [0, 1/2), got {self.beta}")


@dataclass(frozen=True)
class DeltaPolicy:
    """How the concentration slack delta is chosen.

    ``raw``: delta given directly.  ``independent_scaled``: delta = K/sqrt(s).
    ``correlated_scaled``: delta = K/s.
    """

    mode: str = "raw"
    value: float = 0.01

    @classmethod
    def raw(cls, delta: float) -> "DeltaPolicy":
        return cls("raw", float(delta))

    @classmethod
    def independent_scaled(cls, K: float) -> "DeltaPolicy":
        return cls("independent_scaled", float(K))

    @classmethod
    def correlated_scaled(cls, K: float) -> "DeltaPolicy":
        return cls("correlated_scaled", float(K))

    def resolve(self, s: int, regime: Regime | str) -> float:
        regime = Regime(regime)
        v = self.value
        if self.mode == "raw":
            delta = v
        elif self.mode == "independent_scaled":
            if not 0 < v < math.sqrt(s):
                raise ConfigurationError(f"need 0 < K < sqrt(s) = {math.sqrt(s):.4g}, got K={v}")
            delta = v / math.sqrt(s)
        elif self.mode == "correlated_scaled":
            if not 0 < v < s / math.sqrt(2):
                raise ConfigurationError(f"need 0 < K < s/sqrt(2) = {s / math.sqrt(2):.4g}, got K={v}")
            delta = v / s
        else:
            raise ConfigurationError(f"unknown delta policy {self.mode!r}")
        upper = 1.0 if regime is Regime.INDEPENDENT else 1 / math.sqrt(2)
        if not 0 < delta < upper:
            raise ConfigurationError(f"delta must lie in (0, {upper:.4g}) for the {regime.value} case, got {delta}")
        return delta


@dataclass(eq=False)
class LambdaWindow:
    lo: float
    hi: float
    per_client_lo: np.ndarray
    per_client_hi: np.ndarray
    delta: float
    regime: Regime
    lo_binding: tuple[int, int | None] = (0, None)
    hi_binding: tuple[int, int | None] = (0, None)

    @property
    def feasible(self) -> bool:
        return self.lo >= 0 and self.lo < self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, lam: float) -> bool:
        return self.lo < lam < self.hi


class LambdaOutsideWindowWarning(UserWarning):
    """A manually supplied lambda lies outside the feasible window."""


def _assemble(per_lo, lo_coord, per_hi, hi_coord, delta, regime) -> LambdaWindow:
    per_lo = np.asarray(per_lo, dtype=float)
    per_hi = np.asarray(per_hi, dtype=float)
    i_lo = int(np.argmax(per_lo))
    i_hi = int(np.argmin(per_hi))
    return LambdaWindow(
        lo=float(per_lo[i_lo]),
        hi=float(per_hi[i_hi]),
        per_client_lo=per_lo,
        per_client_hi=per_hi,
        delta=delta,
        regime=regime,
        lo_binding=(i_lo, lo_coord[i_lo]),
        hi_binding=(i_hi, hi_coord[i_hi]),
    )


def _check(gt: GroundTruth, profiles: Sequence[ClientProfile]):
    if gt.s < 1:
        raise ConfigurationError("empty support: no window exists")
    if not profiles:
        raise ConfigurationError("need at least one client profile")
    for p in profiles:
        if p.covariance.d != gt.d:
            raise ConfigurationError(f"client {p.client_id}: covariance dimension != d")


def window_independent(gt: GroundTruth, profiles: Sequence[ClientProfile], policy: DeltaPolicy) -> LambdaWindow:
    """Window for mutually independent predictors.

    Per client i and support coordinate j::

        lo_i  = 8 delta rho_i^2 ||w_S|| + 8 |eta_i rho_i| delta
        hi_ij = |w_j| sigma_jj^2 - 8 |w_j| rho_i^2 delta
                - 8 rho_i^2 ||w_{S minus j}|| delta - 8 |eta_i rho_i| delta
    """
    _check(gt, profiles)
    for p in profiles:
        if p.covariance.regime is not Regime.INDEPENDENT:
            raise ConfigurationError(f"client {p.client_id} is not in the independent regime")
    delta = policy.resolve(gt.s, Regime.INDEPENDENT)
    S = gt.support_index
    wS = gt.w_star[S]
    total = float(np.sum(wS**2))
    norm_all = math.sqrt(total)
    norm_rest = np.sqrt(np.clip(total - wS**2, 0.0, None))
    per_lo, per_hi, hi_coord = [], [], []
    for p in profiles:
        r2 = p.rho**2
        noise = 8 * abs(p.eta * p.rho) * delta
        per_lo.append(8 * delta * r2 * norm_all + noise)
        sig2 = p.covariance.diag[S]
        hi = np.abs(wS * sig2) - 8 * np.abs(wS) * r2 * delta - 8 * r2 * norm_rest * delta - noise
        k = int(np.argmin(hi))
        per_hi.append(hi[k])
        hi_coord.append(int(S[k]))
    return _assemble(per_lo, [None] * len(profiles), per_hi, hi_coord, delta, Regime.INDEPENDENT)


def correlated_scale(profile: ClientProfile) -> float:
    """``(1 + 4 max_j rho^2 / sigma_jj^2) * max_j sigma_jj^2`` over all d coordinates.

    Kept separate so the reading of the two maxima can be swapped.
    """
    diag = profile.covariance.diag
    return float((1 + 4 * np.max(profile.rho**2 / diag)) * np.max(diag))


def window_correlated(gt: GroundTruth, profiles: Sequence[ClientProfile], policy: DeltaPolicy) -> LambdaWindow:
    """Window for arbitrary (possibly correlated) predictors.

    Lower bounds range over non-support coordinates, upper bounds over the
    support; with zero off-diagonals this is a (looser) independent window.
    """
    _check(gt, profiles)
    delta = policy.resolve(gt.s, Regime.CORRELATED)
    S = gt.support_index
    N = gt.nonsupport_index
    wS = gt.w_star[S]
    abs_w = np.abs(wS)
    per_lo, lo_coord, per_hi, hi_coord = [], [], [], []
    for p in profiles:
        cols = p.covariance.columns(gt.support, S)  # Sigma[:, S]
        drift = cols @ wS  # E[alpha_j] = sum_k w_k sigma_jk for every j
        f = 8 * math.sqrt(2) * correlated_scale(p) * delta
        noise = 8 * abs(p.eta * p.rho) * delta
        if N.size:
            lo = np.abs(drift[N]) + f * abs_w.sum() + noise
            k = int(np.argmax(lo))
            per_lo.append(lo[k])
            lo_coord.append(int(N[k]))
        else:
            per_lo.append(0.0)
            lo_coord.append(None)
        hi = (
            np.abs(drift[S])
            - 8 * abs_w * p.rho**2 * delta
            - f * (abs_w.sum() - abs_w)
            - noise
        )
        k = int(np.argmin(hi))
        per_hi.append(hi[k])
        hi_coord.append(int(S[k]))
    return _assemble(per_lo, lo_coord, per_hi, hi_coord, delta, Regime.CORRELATED)


def min_samples(
    s: int,
    policy: DeltaPolicy,
    beta: float = 0.0,
    regime: Regime | str = Regime.INDEPENDENT,
    cap: int = 2**62,
) -> int:
    """Smallest integer at or above the per-client sample bound.

    Independent predictors: ``log(12 (1-beta) / (1-2 beta)) / delta^2``.
    Correlated predictors: ``log((8s+4)(1-beta) / (1-2 beta)) / delta^2``.
    """
    if not 0 <= beta < 0.5:
        raise ConfigurationError(f"beta must be in [0, 1/2), got {beta}")
    regime = Regime(regime)
    delta = policy.resolve(s, regime)
    base = 12.0 if regime is Regime.INDEPENDENT else 8.0 * s + 4.0
    ratio = base * (1 - beta) / (1 - 2 * beta)
    bound = math.log(ratio) / delta**2
    if not math.isfinite(bound) or bound > cap:
        raise SampleBoundOverflow(f"sample bound {bound:.4g} exceeds cap {cap} (beta={beta})")
    return max(1, math.ceil(bound))


def choose_lambda(window: LambdaWindow, rule="midpoint") -> float:
    """Pick a lambda from ``window``.

    ``rule`` is ``"midpoint"``, ``"geometric"`` or a number (manual value,
    returned as is; a :class:`LambdaOutsideWindowWarning` is issued when it
    falls outside the window).
    """
    if not isinstance(rule, str):
        lam = float(rule)
        if not lam > 0:
            raise ConfigurationError(f"lambda must be positive, got {lam}")
        if not (window.feasible and lam in window):
            warnings.warn(
                f"lambda={lam} lies outside the window ({window.lo:.6g}, {window.hi:.6g})",
                LambdaOutsideWindowWarning,
                stacklevel=2,
            )
        return lam
    if not window.feasible:
        raise InfeasibleWindowError(
            f"empty lambda window: lo={window.lo:.6g} >= hi={window.hi:.6g}",
            window.per_client_lo,
            window.per_client_hi,
        )
    if rule == "midpoint":
        return 0.5 * (window.lo + window.hi)
    if rule == "geometric":
        if window.lo <= 0:
            raise ConfigurationError("geometric mean needs a strictly positive lower bound")
        return math.sqrt(window.lo * window.hi)
    raise ConfigurationError(f"unknown lambda rule {rule!r}")


def clients_for(d: int, multiplier: float = 2.0) -> int:
    """``ceil(multiplier * ln d)`` clients, at least one."""
    return max(1, math.ceil(multiplier * math.log(d)))
