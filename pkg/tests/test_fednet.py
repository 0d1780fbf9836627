import socket
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsupport import (
    AdversaryConfig,
    ConfigurationError,
    RoundConfig,
    RoundFailedError,
    SupportVote,
    decide_support,
    make_ground_truth,
    make_profiles,
    run_networked_round,
    simulate_round,
    tally_votes,
)
from fedsupport.fednet import Role, VoteServer, assign_roles, plan_round, run_client_process, send_vote
from fedsupport.synthdata import ClientDataset, ClientProfile, Family, independent_covariance
from fedsupport.wire import MsgType, Status, decode_reply, encode_vote, frame_length


def easy_instance(g, seed=0, d=12):
    gt = make_ground_truth(d, 2, (1.0, 1.0), seed=seed)
    return gt, make_profiles(gt, g, 400, eta_range=(0.1, 0.1), master_seed=seed)


def fixed_datasets(gt, g):
    """Noiseless, exactly orthogonal data: every honest client votes the true support."""
    X = np.sqrt(2 * gt.d) * np.eye(2 * gt.d)[:, : gt.d]
    y = X @ gt.w_star
    prof = ClientProfile(0, X.shape[0], 1.0, 1.0, Family.GAUSSIAN, independent_covariance(gt.d, 1.0), 0)
    return [ClientDataset(prof, X, y) for _ in range(g)]


def test_round_config_invariants():
    with pytest.raises(ConfigurationError):
        RoundConfig(4, adversary=AdversaryConfig(0.5))
    with pytest.raises(ConfigurationError):
        RoundConfig(4, adversary=AdversaryConfig(0.4), straggler_fraction=0.3, failure_fraction=0.3)
    with pytest.raises(ConfigurationError):
        RoundConfig(0)


def test_role_counts_follow_fractions():
    cfg = RoundConfig(25, adversary=AdversaryConfig(0.28), straggler_fraction=0.1, failure_fraction=0.05)
    roles = assign_roles(cfg, 3)
    assert roles.count(Role.ROGUE) == 7
    assert roles.count(Role.STRAGGLER) == 2
    assert roles.count(Role.FAILED) == 1
    assert roles == assign_roles(cfg, 3)


def test_no_adversary_equals_plain_pipeline():
    gt, profiles = easy_instance(5)
    from fedsupport import run_client, sample_client_dataset

    plain = decide_support(tally_votes([run_client(sample_client_dataset(gt, p), 0.5, p.client_id) for p in profiles], gt.d))
    assert simulate_round(gt, profiles, 0.5, RoundConfig.honest(5), 0) == plain


def test_one_complement_rogue_of_four():
    gt = make_ground_truth(10, 3, (1.0, 1.0), seed=1)
    data = fixed_datasets(gt, 4)
    profiles = make_profiles(gt, 4, 2, master_seed=1)
    cfg = RoundConfig(4, adversary=AdversaryConfig(0.25))
    assert assign_roles(cfg, 0).count(Role.ROGUE) == 1
    rep = simulate_round(gt, profiles, 0.5, cfg, 0, datasets=data)
    assert rep.exact(gt.support)
    assert set(rep.counts.tolist()) == {1, 3}


def test_silent_client_changes_nothing_and_complement_flips_its_bit():
    gt = make_ground_truth(10, 3, (1.0, 1.0), seed=2)
    profiles = make_profiles(gt, 5, 2, master_seed=2)
    data = fixed_datasets(gt, 5)
    silent = RoundConfig(5, adversary=AdversaryConfig(0.2, "silent"))
    rogue = RoundConfig(5, adversary=AdversaryConfig(0.2, "complement"))
    assert assign_roles(silent, 0) == assign_roles(rogue, 0)
    # baseline: the four clients that stay honest in both runs
    idx = assign_roles(silent, 0).index(Role.ROGUE)
    order = [k for k in range(5) if k != idx] + [idx]
    honest_counts = simulate_round(
        gt, [profiles[k] for k in order[:4]], 0.5, RoundConfig.honest(4), 0, [data[k] for k in order[:4]]
    ).counts
    truth_bits = np.array([int(j in gt.support) for j in range(gt.d)])
    np.testing.assert_array_equal(simulate_round(gt, profiles, 0.5, silent, 0, data).counts, honest_counts)
    np.testing.assert_array_equal(simulate_round(gt, profiles, 0.5, rogue, 0, data).counts, honest_counts + (1 - truth_bits))


def test_stragglers_are_excluded():
    gt, profiles = easy_instance(10, seed=4)
    rep = simulate_round(gt, profiles, 0.5, RoundConfig(10, straggler_fraction=0.3), 4)
    assert rep.g_used == 7


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), beta=st.sampled_from([0.0, 0.2, 0.4]))
def test_simulation_is_deterministic(seed, beta):
    gt, profiles = easy_instance(6, seed=seed % 1000)
    cfg = RoundConfig(6, adversary=AdversaryConfig(beta, "random_bits"))
    assert simulate_round(gt, profiles, 0.5, cfg, seed) == simulate_round(gt, profiles, 0.5, cfg, seed)


# ---------------------------------------------------------------- networked


def test_three_honest_clients_match_simulation():
    gt, profiles = easy_instance(3, seed=6)
    cfg = RoundConfig.honest(3, timeout=10)
    assert run_networked_round(gt, profiles, 0.5, cfg, 6) == simulate_round(gt, profiles, 0.5, cfg, 6)


def test_missing_client_times_out():
    gt, profiles = easy_instance(5, seed=7)
    cfg = RoundConfig(5, timeout=2.0, failure_fraction=0.2)
    rep = run_networked_round(gt, profiles, 0.5, cfg, 7)
    assert rep.g_used == 4
    assert rep == simulate_round(gt, profiles, 0.5, cfg, 7)


def test_networked_stragglers_are_excluded():
    gt, profiles = easy_instance(5, seed=8)
    cfg = RoundConfig(5, timeout=1.0, straggler_fraction=0.4)
    rep = run_networked_round(gt, profiles, 0.5, cfg, 8)
    assert rep.g_used == 3
    assert rep == simulate_round(gt, profiles, 0.5, cfg, 8)


def test_duplicate_is_rejected_and_treated_as_delivered():
    vote = SupportVote(3, (1, 0, 1, 1))
    with VoteServer(RoundConfig.honest(2, timeout=1.0)) as srv:
        assert send_vote(srv.address, vote) is Status.OK
        # a resend after a lost ack: the server rejects, the client is satisfied
        assert send_vote(srv.address, SupportVote(3, (0, 0, 0, 0))) is Status.DUPLICATE
        rep = srv.wait()
    assert rep.counts.tolist() == [1, 0, 1, 1]
    assert srv.rejected == [(3, Status.DUPLICATE)]
    assert srv.bytes_by_client[3] <= frame_length(4)


def _raw_exchange(address, payload: bytes) -> bytes:
    with socket.create_connection(address, timeout=5) as sock:
        sock.sendall(payload)
        sock.shutdown(socket.SHUT_WR)
        return sock.recv(64)


def test_malformed_and_mismatched_frames_get_rejects():
    with VoteServer(RoundConfig.honest(1, timeout=0.5), d=4) as srv:
        reply = decode_reply(_raw_exchange(srv.address, b"XXXX" + bytes(9)))
        assert reply[0] is MsgType.REJECT and reply[2] is Status.MALFORMED
        reply = decode_reply(_raw_exchange(srv.address, encode_vote(SupportVote(1, (1, 1)))))
        assert reply[2] is Status.DIMENSION_MISMATCH
        with pytest.raises(RoundFailedError):
            srv.wait()


def test_server_down_raises_after_retries():
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    with pytest.raises(ConnectionError):
        send_vote(("127.0.0.1", port), SupportVote(0, (1,)), retries=2, backoff=0.01, timeout=0.5)


def test_bind_failure_is_os_error():
    with VoteServer(RoundConfig.honest(1)) as srv:
        with pytest.raises(OSError):
            VoteServer(RoundConfig.honest(1), srv.address)


def test_client_process_on_two_sample_csv(tmp_path):
    csv_path = tmp_path / "client_0.csv"
    csv_path.write_text("y,x1,x2\n4,2,0\n4,2,0\n")
    with VoteServer(RoundConfig.honest(1, timeout=5)) as srv:
        assert run_client_process(srv.address, csv_path, 1.0, client_id=0) is Status.OK
        rep = srv.wait()
    assert rep.support == {0} and rep.d == 2


def test_concurrent_clients_all_counted():
    g, d = 40, 33
    rng = np.random.default_rng(0)
    vs = [SupportVote.from_array(i, rng.integers(0, 2, d)) for i in range(g)]
    with VoteServer(RoundConfig.honest(g, timeout=10)) as srv:
        threads = [threading.Thread(target=send_vote, args=(srv.address, v)) for v in vs]
        for t in threads:
            t.start()
        rep = srv.wait()
        for t in threads:
            t.join()
    assert rep == decide_support(tally_votes(vs, d))
