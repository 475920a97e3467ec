"""Ordered per-slot event log; every metric is computed from it."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, TextIO

KINDS = ("gen", "tx", "ack", "rx_idle", "skip", "drop_retry", "drop_queue")
FIELDS = ("asn", "slot", "channel", "src", "dst", "kind", "seq", "outcome")
HEADER = "# tschsim-trace v1"


class TraceFormatError(ValueError):
    pass


class Event(NamedTuple):
    asn: int
    slot: int
    channel: int
    src: int
    dst: int
    kind: str
    seq: int
    outcome: str


@dataclass
class SlotTrace:
    timeslot_ms: float
    length: int
    sink: int
    warmup_asn: int = 0
    horizon_asn: int = 0
    events: list = field(default_factory=list)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def of_kind(self, kind: str) -> Iterator[Event]:
        return (e for e in self.events if e.kind == kind)

    def write(self, fh: TextIO) -> None:
        fh.write(f"{HEADER} timeslot_ms={self.timeslot_ms!r} length={self.length} "
                 f"sink={self.sink} warmup={self.warmup_asn} horizon={self.horizon_asn}\n")
        fh.write(",".join(FIELDS) + "\n")
        for e in self.events:
            fh.write(f"{e.asn},{e.slot},{e.channel},{e.src},{e.dst},{e.kind},{e.seq},{e.outcome}\n")

    def dumps(self) -> str:
        buf = io.StringIO()
        self.write(buf)
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            self.write(fh)


def read_trace(fh: TextIO) -> SlotTrace:
    first = fh.readline().strip()
    if not first.startswith(HEADER):
        raise TraceFormatError("missing trace header")
    meta = dict(tok.split("=", 1) for tok in first[len(HEADER):].split())
    if fh.readline().strip() != ",".join(FIELDS):
        raise TraceFormatError("unexpected column header")
    trace = SlotTrace(timeslot_ms=float(meta["timeslot_ms"]), length=int(meta["length"]),
                      sink=int(meta["sink"]), warmup_asn=int(meta["warmup"]),
                      horizon_asn=int(meta["horizon"]))
    for line in fh:
        parts = line.rstrip("\n").split(",")
        if len(parts) != len(FIELDS):
            raise TraceFormatError(f"malformed trace line: {line!r}")
        trace.events.append(Event(int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3]),
                                  int(parts[4]), parts[5], int(parts[6]), parts[7]))
    return trace


def load_trace(path) -> SlotTrace:
    with open(path) as fh:
        return read_trace(fh)
