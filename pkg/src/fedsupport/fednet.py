"""Round runtime: in-process simulation and a TCP server/client pair.

Both modes share role assignment and vote construction, so a seeded round
without network faults produces the same report either way.
"""

from __future__ import annotations

import enum
import logging
import math
import os
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .aggregate import RecoveryReport, VoteTally, decide_support
from .client import SupportVote, run_client
from .errors import ConfigurationError, DuplicateVoteError, ProtocolError, RoundFailedError
from .synthdata import ClientDataset, ClientProfile, GroundTruth, derive_seed, load_client_csv, sample_client_dataset
from .window import AdversaryConfig, Behavior
from .wire import (
    HEADER_SIZE,
    MsgType,
    Status,
    decode_header,
    decode_reply,
    decode_vote,
    encode_reply,
    encode_vote,
    frame_length,
)

log = logging.getLogger(__name__)

__all__ = [
    "Role",
    "RoundConfig",
    "PlannedVote",
    "assign_roles",
    "plan_round",
    "simulate_round",
    "VoteServer",
    "serve_round",
    "send_vote",
    "run_client_process",
    "run_networked_round",
    "TIMEOUT_ENV",
]

TIMEOUT_ENV = "FEDSUPPORT_TIMEOUT"


class Role(str, enum.Enum):
    HONEST = "honest"
    ROGUE = "rogue"
    STRAGGLER = "straggler"
    FAILED = "failed"


@dataclass(frozen=True)
class RoundConfig:
    expected_clients: int
    timeout: float = 10.0
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    straggler_fraction: float = 0.0
    failure_fraction: float = 0.0

    def __post_init__(self):
        if self.expected_clients < 1:
            raise ConfigurationError("expected_clients must be >= 1")
        if self.timeout <= 0:
            raise ConfigurationError("timeout must be positive")
        for name in ("straggler_fraction", "failure_fraction"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ConfigurationError(f"{name} must be in [0, 1), got {v}")
        if self.straggler_fraction + self.failure_fraction + self.adversary.beta >= 1:
            raise ConfigurationError("faulty fractions leave no honest client")

    @classmethod
    def honest(cls, g: int, timeout: float = 10.0) -> "RoundConfig":
        return cls(expected_clients=g, timeout=timeout)


def _count(frac: float, g: int) -> int:
    return int(math.floor(frac * g + 1e-9))


def assign_roles(cfg: RoundConfig, master_seed: int) -> list[Role]:
    """Seeded role per client id: ``floor(fraction * g)`` of each faulty kind."""
    g = cfg.expected_clients
    n_rogue = _count(cfg.adversary.beta, g)
    n_strag = _count(cfg.straggler_fraction, g)
    n_fail = _count(cfg.failure_fraction, g)
    order = np.random.default_rng(derive_seed(master_seed, 3)).permutation(g)
    roles = [Role.HONEST] * g
    for k, cid in enumerate(order):
        if k < n_rogue:
            roles[cid] = Role.ROGUE
        elif k < n_rogue + n_strag:
            roles[cid] = Role.STRAGGLER
        elif k < n_rogue + n_strag + n_fail:
            roles[cid] = Role.FAILED
    return roles


@dataclass(frozen=True)
class PlannedVote:
    client_id: int
    role: Role
    vote: SupportVote | None  # None: the client never sends

    @property
    def on_time(self) -> bool:
        return self.vote is not None and self.role is not Role.STRAGGLER


def _rogue_vote(honest: SupportVote, behavior: Behavior, master_seed: int) -> SupportVote | None:
    if behavior is Behavior.COMPLEMENT:
        return honest.complement()
    if behavior is Behavior.SILENT:
        return None
    rng = np.random.default_rng(derive_seed(master_seed, 4, honest.client_id))
    return SupportVote.from_array(honest.client_id, rng.integers(0, 2, size=honest.d))


def plan_round(
    gt: GroundTruth,
    profiles: Sequence[ClientProfile],
    lam: float,
    cfg: RoundConfig,
    master_seed: int,
    datasets: Sequence[ClientDataset] | None = None,
) -> list[PlannedVote]:
    """What each client would transmit in this round (or ``None``)."""
    if len(profiles) != cfg.expected_clients:
        raise ConfigurationError(f"{len(profiles)} profiles for {cfg.expected_clients} expected clients")
    roles = assign_roles(cfg, master_seed)
    plan = []
    for k, (profile, role) in enumerate(zip(profiles, roles)):
        if role is Role.FAILED or (role is Role.ROGUE and cfg.adversary.behavior is Behavior.SILENT):
            plan.append(PlannedVote(profile.client_id, role, None))
            continue
        data = datasets[k] if datasets is not None else sample_client_dataset(gt, profile)
        vote = run_client(data, lam, profile.client_id)
        if role is Role.ROGUE:
            vote = _rogue_vote(vote, cfg.adversary.behavior, master_seed)
        plan.append(PlannedVote(profile.client_id, role, vote))
    return plan


def simulate_round(
    gt: GroundTruth,
    profiles: Sequence[ClientProfile],
    lam: float,
    cfg: RoundConfig,
    master_seed: int,
    datasets: Sequence[ClientDataset] | None = None,
) -> RecoveryReport:
    """One full round in-process; stragglers are dropped as if timed out."""
    tally = VoteTally(gt.d)
    for planned in plan_round(gt, profiles, lam, cfg, master_seed, datasets):
        if planned.on_time:
            tally.add(planned.vote)
    if tally.g_received == 0:
        raise RoundFailedError("no client delivered a vote")
    return decide_support(tally)


# ---------------------------------------------------------------- networking


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = str(text).rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigurationError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            break
        buf += chunk
    return bytes(buf)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        srv: VoteServer = self.server.owner
        sock = self.request
        sock.settimeout(srv.io_timeout)
        try:
            head = _recv_exact(sock, HEADER_SIZE)
            mtype, client_id, d = decode_header(head)
            if mtype is not MsgType.VOTE:
                raise ProtocolError("clients may only send votes", field="msg_type")
            if d < 1 or (srv.d is not None and d != srv.d):
                sock.sendall(encode_reply(MsgType.REJECT, client_id, Status.DIMENSION_MISMATCH))
                return
            body = _recv_exact(sock, frame_length(d) - HEADER_SIZE)
            vote = decode_vote(head + body)
        except ProtocolError as exc:
            log.info("malformed frame from %s: %s", self.client_address, exc)
            try:
                sock.sendall(encode_reply(MsgType.REJECT, 0, Status.MALFORMED))
            except OSError:
                pass
            return
        except OSError:
            return
        status = srv.offer(vote, len(head) + len(body))
        reply = MsgType.ACK if status is Status.OK else MsgType.REJECT
        try:
            sock.sendall(encode_reply(reply, vote.client_id, status))
        except OSError:
            pass


class _TCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class VoteServer:
    """Collects one vote per client until ``expected_clients`` or timeout.

    Use as a context manager; :meth:`wait` blocks on the round barrier and
    returns the decision.
    """

    def __init__(self, cfg: RoundConfig, bind=("127.0.0.1", 0), d: int | None = None, io_timeout: float = 5.0):
        if isinstance(bind, str):
            bind = parse_address(bind)
        self.cfg = cfg
        self.d = d
        self.io_timeout = io_timeout
        self.tally: VoteTally | None = VoteTally(d) if d else None
        self.bytes_by_client: dict[int, int] = {}
        self.rejected: list[tuple[int, Status]] = []
        self._cond = threading.Condition()
        self._closed = False
        self._server = _TCPServer(tuple(bind), _Handler)
        self._server.owner = self
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> "VoteServer":
        self._thread = threading.Thread(target=self._server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)
        self._thread.start()
        return self

    def offer(self, vote: SupportVote, nbytes: int) -> Status:
        with self._cond:
            if self._closed:
                status = Status.ROUND_CLOSED
            else:
                if self.tally is None:
                    self.tally = VoteTally(vote.d)
                    self.d = vote.d
                try:
                    self.tally.add(vote)
                    self.bytes_by_client[vote.client_id] = nbytes
                    status = Status.OK
                except DuplicateVoteError:
                    status = Status.DUPLICATE
                except ProtocolError:
                    status = Status.DIMENSION_MISMATCH
                self._cond.notify_all()
            if status is not Status.OK:
                self.rejected.append((vote.client_id, status))
            return status

    def _received(self) -> int:
        return 0 if self.tally is None else self.tally.g_received

    def wait(self) -> RecoveryReport:
        deadline = time.monotonic() + self.cfg.timeout
        with self._cond:
            while self._received() < self.cfg.expected_clients:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                self._cond.wait(remaining)
            self._closed = True
            received = self._received()
        log.info("round closed with %d/%d votes", received, self.cfg.expected_clients)
        if received == 0:
            raise RoundFailedError(f"no votes received within {self.cfg.timeout}s")
        return decide_support(self.tally)

    def close(self):
        with self._cond:
            self._closed = True
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()


def serve_round(cfg: RoundConfig, bind_address="127.0.0.1:0", d: int | None = None, on_ready=None) -> RecoveryReport:
    """Run one round; ``on_ready(address)`` is called once the socket is bound."""
    with VoteServer(cfg, bind_address, d=d) as srv:
        if on_ready is not None:
            on_ready(srv.address)
        return srv.wait()


def send_vote(address, vote: SupportVote, retries: int = 3, timeout: float = 5.0, backoff: float = 0.1) -> Status:
    """Send ``vote`` once, retrying the same frame on connection problems.

    A duplicate rejection counts as success: it means an earlier attempt
    already landed and only its ack was lost.
    """
    if isinstance(address, str):
        address = parse_address(address)
    frame = encode_vote(vote)
    last: Exception | None = None
    for attempt in range(retries + 1):
        if attempt:
            time.sleep(backoff * 2 ** (attempt - 1))
        try:
            with socket.create_connection(tuple(address), timeout=timeout) as sock:
                sock.settimeout(timeout)
                sock.sendall(frame)
                reply = _recv_exact(sock, HEADER_SIZE)
        except OSError as exc:
            last = exc
            continue
        if len(reply) < HEADER_SIZE:
            last = ConnectionError("connection closed before reply")
            continue
        mtype, _, status = decode_reply(reply)
        if mtype is MsgType.ACK or status is Status.DUPLICATE:
            return status
        raise ProtocolError(f"vote rejected: {status.name}", field="status")
    raise ConnectionError(f"could not deliver vote after {retries + 1} attempts: {last}")


def run_client_process(
    server_address,
    data_source,
    lam: float,
    client_id: int | None = None,
    retries: int = 3,
    timeout: float = 5.0,
) -> Status:
    """Compute this client's vote from ``data_source`` and deliver it.

    ``data_source`` is a CSV path, a ``ClientDataset`` or an ``(X, y)`` pair.
    """
    if isinstance(data_source, (str, os.PathLike)):
        data_source = load_client_csv(data_source)
    vote = run_client(data_source, lam, client_id)
    return send_vote(server_address, vote, retries=retries, timeout=timeout)


def run_networked_round(
    gt: GroundTruth,
    profiles: Sequence[ClientProfile],
    lam: float,
    cfg: RoundConfig,
    master_seed: int,
    bind="127.0.0.1:0",
    datasets: Sequence[ClientDataset] | None = None,
) -> RecoveryReport:
    """Same round as :func:`simulate_round`, but over localhost TCP.

    Every sending client runs in its own thread.  Stragglers send only
    after the server deadline has passed.
    """
    plan = plan_round(gt, profiles, lam, cfg, master_seed, datasets)
    with VoteServer(cfg, bind, d=gt.d) as srv:
        addr = srv.address
        late = threading.Event()

        def deliver(p: PlannedVote):
            if p.role is Role.STRAGGLER:
                late.wait()
            try:
                send_vote(addr, p.vote, retries=1 if p.role is Role.STRAGGLER else 3)
            except (OSError, ProtocolError) as exc:
                log.info("client %d: %s", p.client_id, exc)

        threads = [threading.Thread(target=deliver, args=(p,), daemon=True) for p in plan if p.vote is not None]
        for t in threads:
            t.start()
        try:
            report = srv.wait()
        finally:
            late.set()
        for t in threads:
            t.join(timeout=5)
    return report
