"""Federated exact support recovery for sparse linear regression.

Clients threshold two moment vectors and send one bit per coordinate; the
server keeps every coordinate that at least half the clients voted for.
"""

from .aggregate import RecoveryReport, VoteTally, decide_support, score_against, tally_add, tally_votes
from .client import ClientEstimate, SupportVote, compute_moments, emit_vote, run_client, soft_threshold_estimate
from .errors import (
    ConfigurationError,
    DuplicateVoteError,
    FedSupportError,
    InfeasibleWindowError,
    ProtocolError,
    RoundFailedError,
    SampleBoundOverflow,
)
from .fednet import RoundConfig, run_client_process, run_networked_round, serve_round, simulate_round
from .lasso import LassoProblem, centralized_support, solve_lasso
from .synthdata import (
    ClientDataset,
    ClientProfile,
    CovarianceSpec,
    Family,
    GroundTruth,
    Regime,
    empirical_covariance,
    make_ground_truth,
    make_profiles,
    sample_client_dataset,
)
from .window import (
    AdversaryConfig,
    Behavior,
    DeltaPolicy,
    LambdaWindow,
    choose_lambda,
    min_samples,
    window_correlated,
    window_independent,
)
from .wire import decode_vote, encode_vote

__version__ = "0.1.0"
