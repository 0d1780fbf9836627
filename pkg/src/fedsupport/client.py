"""One client's work: two moment vectors, a soft threshold, a d-bit vote.

The client never solves an optimisation problem.  It needs a single pass
over its samples (O(d n) arithmetic) and sends back one bit per coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "ClientEstimate",
    "SupportVote",
    "compute_moments",
    "soft_threshold_estimate",
    "emit_vote",
    "run_client",
]


@dataclass(eq=False)
class ClientEstimate:
    sigma_hat: np.ndarray
    alpha_hat: np.ndarray
    w_hat: np.ndarray
    lam: float


@dataclass(frozen=True)
class SupportVote:
    """The d-bit message a client sends to the server."""

    client_id: int
    bits: tuple[int, ...]

    @classmethod
    def from_array(cls, client_id: int, bits) -> "SupportVote":
        arr = np.asarray(bits).ravel()
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ConfigurationError("vote bits must be 0 or 1")
        return cls(int(client_id), tuple(int(b) for b in arr))

    @property
    def d(self) -> int:
        return len(self.bits)

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.uint8)

    def complement(self) -> "SupportVote":
        return SupportVote(self.client_id, tuple(1 - b for b in self.bits))

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


def compute_moments(X, y) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature second moment ``mean(X_j**2)`` and cross moment ``mean(y X_j)``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] < 1:
        raise ConfigurationError("need an n x d matrix with n >= 1")
    if y.size != X.shape[0]:
        raise ConfigurationError(f"y has {y.size} entries, X has {X.shape[0]} rows")
    n = X.shape[0]
    sigma_hat = np.einsum("ij,ij->j", X, X) / n
    alpha_hat = y @ X / n
    return sigma_hat, alpha_hat


def soft_threshold_estimate(sigma_hat, alpha_hat, lam: float) -> ClientEstimate:
    """``w_j = sign(alpha_j) max(0, |alpha_j| - lam) / sigma_j``.

    A feature with ``sigma_hat == 0`` was never observed non-zero; its
    estimate is forced to 0 instead of dividing by zero.
    """
    if not lam > 0:
        raise ConfigurationError(f"lambda must be positive, got {lam}")
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    shrunk = np.sign(alpha_hat) * np.maximum(0.0, np.abs(alpha_hat) - lam)
    observed = sigma_hat > 0
    w_hat = np.zeros_like(shrunk)
    np.divide(shrunk, sigma_hat, out=w_hat, where=observed)
    return ClientEstimate(sigma_hat, alpha_hat, w_hat, float(lam))


def emit_vote(est: ClientEstimate, client_id: int) -> SupportVote:
    return SupportVote(int(client_id), tuple(int(v) for v in (est.w_hat != 0)))


def run_client(data, lam: float, client_id: int | None = None) -> SupportVote:
    """Full client pipeline.

    ``data`` is a :class:`~fedsupport.synthdata.ClientDataset` or an
    ``(X, y)`` pair; ``client_id`` defaults to the dataset's profile id.
    """
    if isinstance(data, tuple):
        X, y = data
        cid = 0 if client_id is None else client_id
    else:
        X, y = data.X, data.y
        cid = data.profile.client_id if client_id is None else client_id
    sigma_hat, alpha_hat = compute_moments(X, y)
    return emit_vote(soft_threshold_estimate(sigma_hat, alpha_hat, lam), cid)
