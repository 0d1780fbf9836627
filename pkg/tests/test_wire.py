import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsupport import ProtocolError, SupportVote, decode_vote, encode_vote
from fedsupport.wire import HEADER_SIZE, MsgType, Status, decode_reply, encode_reply, frame_length

votes = st.integers(1, 300).flatmap(
    lambda d: st.builds(
        SupportVote,
        st.integers(0, 2**32 - 1),
        st.lists(st.integers(0, 1), min_size=d, max_size=d).map(tuple),
    )
)


def test_lsb_first_payload():
    frame = encode_vote(SupportVote(0, (1, 0, 1)))
    assert frame[HEADER_SIZE:] == bytes([0b00000101])


def test_all_zero_byte_vote():
    frame = encode_vote(SupportVote(0, (0,) * 8))
    assert frame[HEADER_SIZE:] == b"\x00" and len(frame) == 14


def test_header_layout():
    frame = encode_vote(SupportVote(258, (1,) * 9))
    assert frame[:4] == b"FSV1"
    assert frame[4] == 1
    assert struct.unpack(">II", frame[5:13]) == (258, 9)
    assert frame[13:] == bytes([0xFF, 0x01])


@settings(max_examples=300, deadline=None)
@given(votes)
def test_roundtrip(v):
    frame = encode_vote(v)
    assert len(frame) == frame_length(v.d) == 13 + (v.d + 7) // 8
    assert decode_vote(frame) == v


def test_bad_magic():
    frame = bytearray(encode_vote(SupportVote(1, (1, 1))))
    frame[0] ^= 0xFF
    with pytest.raises(ProtocolError) as err:
        decode_vote(bytes(frame))
    assert err.value.field == "magic"


def test_nonzero_pad_bits():
    frame = bytearray(encode_vote(SupportVote(1, (1, 0, 1))))
    frame[-1] |= 0x80
    with pytest.raises(ProtocolError) as err:
        decode_vote(bytes(frame))
    assert err.value.field == "pad"


@pytest.mark.parametrize("cut", [0, 5, 12, 13])
def test_truncated(cut):
    frame = encode_vote(SupportVote(1, (1,) * 12))
    with pytest.raises(ProtocolError):
        decode_vote(frame[:cut])


def test_trailing_bytes_and_bad_type():
    frame = encode_vote(SupportVote(1, (1, 0)))
    with pytest.raises(ProtocolError):
        decode_vote(frame + b"\x00")
    bad = bytearray(frame)
    bad[4] = 9
    with pytest.raises(ProtocolError) as err:
        decode_vote(bytes(bad))
    assert err.value.field == "msg_type"


def test_zero_dimension_rejected():
    with pytest.raises(ProtocolError):
        encode_vote(SupportVote(1, ()))
    with pytest.raises(ProtocolError):
        decode_vote(b"FSV1" + bytes([1]) + struct.pack(">II", 1, 0))


def test_reply_roundtrip():
    for mtype, status in [(MsgType.ACK, Status.OK), (MsgType.REJECT, Status.DUPLICATE)]:
        frame = encode_reply(mtype, 42, status)
        assert len(frame) == HEADER_SIZE
        assert decode_reply(frame) == (mtype, 42, status)
    with pytest.raises(ProtocolError):
        encode_reply(MsgType.VOTE, 1)
