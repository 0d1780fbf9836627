import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsupport import DuplicateVoteError, ProtocolError, RecoveryReport, SupportVote, VoteTally, decide_support, score_against, tally_votes
from fedsupport.aggregate import read_support_file, write_report_csv, write_support_file


def votes(*bitstrings):
    return [SupportVote(i, tuple(int(c) for c in b)) for i, b in enumerate(bitstrings)]


def test_single_vote_tally():
    t = tally_votes(votes("101"), 3)
    counts, g = t.snapshot()
    assert counts.tolist() == [1, 0, 1] and g == 1


def test_three_votes_majority():
    t = tally_votes(votes("110", "100", "101"), 3)
    counts, g = t.snapshot()
    assert counts.tolist() == [3, 1, 1] and g == 3
    rep = decide_support(t)
    assert rep.support == {0}
    np.testing.assert_allclose(rep.fractions, [1, 1 / 3, 1 / 3])


def test_duplicate_client_rejected_and_tally_unchanged():
    t = VoteTally(3)
    t.add(SupportVote(7, (1, 0, 1)))
    with pytest.raises(DuplicateVoteError):
        t.add(SupportVote(7, (1, 1, 1)))
    assert t.snapshot()[0].tolist() == [1, 0, 1]


def test_length_mismatch_rejected():
    with pytest.raises(ProtocolError):
        VoteTally(3).add(SupportVote(0, (1, 0)))


def test_even_tie_is_included():
    rep = decide_support(tally_votes(votes("10", "10", "01", "01"), 2))
    assert rep.support == {0, 1}


def test_unanimous_all_ones():
    rep = decide_support(tally_votes(votes("1111", "1111"), 4))
    assert rep.support == {0, 1, 2, 3}


def test_empty_tally_is_error():
    with pytest.raises(ProtocolError):
        decide_support(VoteTally(3))


def _report(support):
    return RecoveryReport(support=frozenset(support), fractions=np.zeros(0), g_used=1)


def test_metrics_39_hits_of_48():
    ref = set(range(40))
    found = set(range(1, 40)) | set(range(100, 109))  # 39 hits, 48 total
    rep = score_against(_report(found), ref)
    assert rep.recall == pytest.approx(39 / 40)
    assert rep.precision == pytest.approx(39 / 48)
    assert rep.f1 == pytest.approx(2 * (39 / 40) * (39 / 48) / (39 / 40 + 39 / 48))


def test_empty_sets_are_flagged():
    rep = score_against(_report(set()), set())
    assert rep.recall == 0 and rep.precision == 0
    assert set(rep.flags) == {"empty_reference", "empty_support"}


def test_self_score_is_perfect():
    rep = score_against(_report({2, 5}), {2, 5})
    assert rep.recall == rep.precision == rep.f1 == 1.0


def test_support_file_roundtrip(tmp_path):
    path = write_support_file({4, 0, 9}, tmp_path / "s.txt")
    assert path.read_text() == "1\n5\n10\n"
    assert read_support_file(path) == {0, 4, 9}


def test_report_csv(tmp_path):
    rep = decide_support(tally_votes(votes("10", "11"), 2))
    text = write_report_csv(rep, tmp_path / "r.csv").read_text().splitlines()
    assert text == ["coordinate,fraction,in_support", "1,1.0,1", "2,0.5,1"]


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_tally_is_order_independent(data):
    d = data.draw(st.integers(1, 10))
    g = data.draw(st.integers(1, 8))
    bits = [data.draw(st.lists(st.integers(0, 1), min_size=d, max_size=d)) for _ in range(g)]
    vs = [SupportVote(i, tuple(b)) for i, b in enumerate(bits)]
    perm = data.draw(st.permutations(vs))
    assert decide_support(tally_votes(vs, d)) == decide_support(tally_votes(perm, d))
