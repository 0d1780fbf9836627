"""Binary framing of votes and server replies.

Layout (big-endian header, 13 bytes, then payload)::

    magic     4 bytes  b"FSV1"
    msg_type  1 byte   1 = vote, 2 = ack, 3 = reject
    client_id 4 bytes  unsigned
    d         4 bytes  unsigned
    payload   ceil(d/8) bytes, bit j in byte j//8 at position j%8 (LSB first),
              unused high bits of the last byte are zero

Ack and reject frames carry no payload; their ``d`` field holds a status
code instead (see :class:`Status`).
"""

from __future__ import annotations

import enum
import struct

import numpy as np

from .client import SupportVote
from .errors import ProtocolError

__all__ = [
    "MAGIC",
    "HEADER",
    "HEADER_SIZE",
    "MsgType",
    "Status",
    "frame_length",
    "encode_vote",
    "decode_vote",
    "encode_reply",
    "decode_header",
    "decode_reply",
]

MAGIC = b"FSV1"
HEADER = struct.Struct(">4sBII")
HEADER_SIZE = HEADER.size  # 13
MAX_D = 1 << 24


class MsgType(enum.IntEnum):
    VOTE = 1
    ACK = 2
    REJECT = 3


class Status(enum.IntEnum):
    OK = 0
    DUPLICATE = 1
    MALFORMED = 2
    DIMENSION_MISMATCH = 3
    ROUND_CLOSED = 4


def frame_length(d: int) -> int:
    return HEADER_SIZE + (int(d) + 7) // 8


def encode_vote(vote: SupportVote) -> bytes:
    d = vote.d
    if d < 1:
        raise ProtocolError("vote must carry at least one bit", field="d")
    if d > MAX_D:
        raise ProtocolError(f"d={d} exceeds the frame limit {MAX_D}", field="d")
    if not 0 <= vote.client_id < 1 << 32:
        raise ProtocolError(f"client_id {vote.client_id} does not fit in 32 bits", field="client_id")
    payload = np.packbits(vote.as_array(), bitorder="little").tobytes()
    return HEADER.pack(MAGIC, MsgType.VOTE, vote.client_id, d) + payload


def decode_header(buf: bytes) -> tuple[MsgType, int, int]:
    """Validate the fixed header; returns ``(msg_type, client_id, d)``."""
    if len(buf) < HEADER_SIZE:
        raise ProtocolError(f"truncated header: {len(buf)} of {HEADER_SIZE} bytes", field="header")
    magic, mtype, client_id, d = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}", field="magic")
    try:
        mtype = MsgType(mtype)
    except ValueError:
        raise ProtocolError(f"unknown msg_type {mtype}", field="msg_type") from None
    return mtype, client_id, d


def decode_vote(buf: bytes) -> SupportVote:
    mtype, client_id, d = decode_header(buf)
    if mtype is not MsgType.VOTE:
        raise ProtocolError(f"expected a vote frame, got {mtype.name}", field="msg_type")
    if d < 1 or d > MAX_D:
        raise ProtocolError(f"invalid dimension d={d}", field="d")
    expected = frame_length(d)
    if len(buf) < expected:
        raise ProtocolError(f"truncated payload: {len(buf)} of {expected} bytes", field="payload")
    if len(buf) > expected:
        raise ProtocolError(f"{len(buf) - expected} trailing bytes after frame", field="payload")
    raw = np.frombuffer(buf, dtype=np.uint8, offset=HEADER_SIZE)
    bits = np.unpackbits(raw, bitorder="little")
    if bits[d:].any():
        raise ProtocolError("non-zero pad bits", field="pad")
    return SupportVote(client_id, tuple(int(b) for b in bits[:d]))


def encode_reply(msg_type: MsgType, client_id: int, status: Status = Status.OK) -> bytes:
    if msg_type not in (MsgType.ACK, MsgType.REJECT):
        raise ProtocolError("replies are ack or reject", field="msg_type")
    return HEADER.pack(MAGIC, msg_type, int(client_id), int(status))


def decode_reply(buf: bytes) -> tuple[MsgType, int, Status]:
    mtype, client_id, code = decode_header(buf)
    if mtype is MsgType.VOTE:
        raise ProtocolError("expected ack or reject, got a vote", field="msg_type")
    if len(buf) != HEADER_SIZE:
        raise ProtocolError("reply frames carry no payload", field="payload")
    try:
        status = Status(code)
    except ValueError:
        raise ProtocolError(f"unknown status code {code}", field="d") from None
    return mtype, client_id, status
