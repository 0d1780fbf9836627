"""Exception hierarchy shared by every module."""

from __future__ import annotations


class FedSupportError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(FedSupportError, ValueError):
    """Invalid parameters, dimensions, or covariance structure."""


class SampleBoundOverflow(ConfigurationError):
    """The sample-size bound diverged or exceeded the configured cap."""


class InfeasibleWindowError(FedSupportError):
    """No lambda satisfies every client's bounds at once.

    The per-client bound vectors are attached so the caller can see
    which clients bind.
    """

    def __init__(self, message, per_client_lo=None, per_client_hi=None):
        super().__init__(message)
        self.per_client_lo = per_client_lo
        self.per_client_hi = per_client_hi


class ProtocolError(FedSupportError):
    """Malformed frame or a vote that violates the round protocol."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DuplicateVoteError(ProtocolError):
    """A client tried to contribute a second vote in the same round."""


class RoundFailedError(FedSupportError):
    """The round ended without a single usable vote."""
