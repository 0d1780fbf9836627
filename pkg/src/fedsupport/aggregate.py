"""Server-side median vote over client support bits."""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .client import SupportVote
from .errors import ConfigurationError, DuplicateVoteError, ProtocolError

__all__ = [
    "VoteTally",
    "RecoveryReport",
    "tally_add",
    "tally_votes",
    "decide_support",
    "score_against",
    "write_report_csv",
    "write_support_file",
    "read_support_file",
]


class VoteTally:
    """Running per-coordinate vote counts.

    Insertion is atomic: the duplicate check and the count update happen
    under one lock, so many connection handlers may add concurrently.
    """

    def __init__(self, d: int):
        if int(d) < 1:
            raise ConfigurationError("d must be >= 1")
        self.d = int(d)
        self.counts = np.zeros(self.d, dtype=np.int64)
        self.contributors: set[int] = set()
        self._lock = threading.Lock()

    @property
    def g_received(self) -> int:
        return len(self.contributors)

    def add(self, vote: SupportVote) -> "VoteTally":
        if vote.d != self.d:
            raise ProtocolError(f"vote has {vote.d} bits, tally expects {self.d}", field="d")
        bits = vote.as_array()
        with self._lock:
            if vote.client_id in self.contributors:
                raise DuplicateVoteError(f"client {vote.client_id} already voted", field="client_id")
            self.contributors.add(vote.client_id)
            self.counts += bits
        return self

    def snapshot(self) -> tuple[np.ndarray, int]:
        with self._lock:
            return self.counts.copy(), len(self.contributors)


def tally_add(tally: VoteTally, vote: SupportVote) -> VoteTally:
    return tally.add(vote)


def tally_votes(votes: Iterable[SupportVote], d: int) -> VoteTally:
    tally = VoteTally(d)
    for v in votes:
        tally.add(v)
    return tally


@dataclass(frozen=True, eq=False)
class RecoveryReport:
    support: frozenset
    fractions: np.ndarray
    g_used: int
    counts: np.ndarray | None = None
    reference: frozenset | None = None
    recall: float | None = None
    precision: float | None = None
    f1: float | None = None
    flags: tuple[str, ...] = field(default=())

    def __eq__(self, other):
        if not isinstance(other, RecoveryReport):
            return NotImplemented
        return (
            self.support == other.support
            and self.g_used == other.g_used
            and np.array_equal(self.fractions, other.fractions)
            and self.reference == other.reference
            and (self.recall, self.precision, self.f1) == (other.recall, other.precision, other.f1)
        )

    __hash__ = None

    @property
    def d(self) -> int:
        return self.fractions.size

    def exact(self, truth) -> bool:
        return self.support == frozenset(truth)

    def summary(self) -> str:
        def fmt(v):
            return "na" if v is None else f"{v:.6f}"

        return (
            f"g_used={self.g_used} support_size={len(self.support)} "
            f"recall={fmt(self.recall)} precision={fmt(self.precision)} f1={fmt(self.f1)}"
        )


def decide_support(tally: VoteTally) -> RecoveryReport:
    """Coordinate j is kept when at least half the received votes include it.

    The test ``2 * count >= g`` is done in integers, so an exact tie on an
    even number of votes is decided identically on every platform.
    """
    counts, g = tally.snapshot()
    if g < 1:
        raise ProtocolError("no votes in tally", field="g_received")
    support = frozenset(int(j) for j in np.flatnonzero(2 * counts >= g))
    fractions = counts / g
    return RecoveryReport(support=support, fractions=fractions, g_used=g, counts=counts)


def score_against(report: RecoveryReport, reference) -> RecoveryReport:
    """Attach recall, precision and F1 of ``report.support`` against ``reference``.

    Empty denominators give 0 and add a flag to the report.
    """
    ref = frozenset(int(j) for j in reference)
    hit = len(report.support & ref)
    flags = list(report.flags)
    if ref:
        recall = hit / len(ref)
    else:
        recall = 0.0
        flags.append("empty_reference")
    if report.support:
        precision = hit / len(report.support)
    else:
        precision = 0.0
        flags.append("empty_support")
    f1 = 0.0 if recall + precision == 0 else 2 * recall * precision / (recall + precision)
    return replace(
        report,
        reference=ref,
        recall=recall,
        precision=precision,
        f1=f1,
        flags=tuple(dict.fromkeys(flags)),
    )


# ---------------------------------------------------------------- file I/O


def write_report_csv(report: RecoveryReport, path) -> Path:
    """``coordinate,fraction,in_support`` rows (1-based coordinates)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["coordinate", "fraction", "in_support"])
        for j, frac in enumerate(report.fractions):
            w.writerow([j + 1, repr(float(frac)), int(j in report.support)])
    return path


def write_support_file(support, path) -> Path:
    """One 1-based coordinate per line, ascending."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{j + 1}\n" for j in sorted(support)))
    return path


def read_support_file(path) -> frozenset:
    out = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            j = int(line)
        except ValueError:
            raise ConfigurationError(f"{path}:{lineno}: not an integer: {line!r}") from None
        if j < 1:
            raise ConfigurationError(f"{path}:{lineno}: coordinates are 1-based, got {j}")
        out.add(j - 1)
    return frozenset(out)
