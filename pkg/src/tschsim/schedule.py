"""Slotframe parameters and the Orchestra-style autonomous cell assignment."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .topology import Topology

LINK_MULTIPLIER = 31
TX, RX = "tx", "rx"
SCHEDULERS = ("receiver_based", "link_based")


@dataclass(frozen=True)
class SlotframeConfig:
    length: int = 17               # slots per unicast slotframe
    timeslot_ms: float = 10.0
    channel_offsets: int = 4
    max_retries: int = 8
    queue_capacity: int = 8
    overhead_duty: float = 0.004   # beacon + broadcast slotframes, Rx-equivalent

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("slotframe length must be >= 1")
        if self.timeslot_ms <= 0:
            raise ValueError("timeslot must be positive")
        if self.channel_offsets < 1:
            raise ValueError("need at least one channel offset")
        if self.max_retries < 0 or self.queue_capacity < 1:
            raise ValueError("max_retries must be >= 0 and queue_capacity >= 1")
        if not 0.0 <= self.overhead_duty < 1.0:
            raise ValueError("overhead_duty must be in [0, 1)")

    @property
    def timeslot_s(self) -> float:
        return self.timeslot_ms / 1000.0


@dataclass(frozen=True)
class Cell:
    slot_offset: int
    channel_offset: int
    direction: str
    peer: Optional[int]  # None = broadcast


def rx_slot_for(node_id: int, length: int) -> int:
    return node_id % length


def link_slot_for(sender_id: int, receiver_id: int, length: int) -> int:
    return (sender_id * LINK_MULTIPLIER + receiver_id) % length


def build_schedule(topology: Topology, kind: str,
                   cfg: SlotframeConfig) -> dict[int, list[Cell]]:
    """Cells per node for the unicast slotframe.

    ``receiver_based``: one shared Rx cell per node keyed on its own id, and
    a Tx cell on the parent's Rx cell. ``link_based``: one cell per directed
    child->parent link keyed on the (sender, receiver) pair.
    """
    L, C = cfg.length, cfg.channel_offsets
    sched: dict[int, list[Cell]] = {n: [] for n in topology.ids}
    if kind == "receiver_based":
        for n in topology.ids:
            sched[n].append(Cell(rx_slot_for(n, L), n % C, RX, None))
            parent = topology.parent(n)
            if parent is not None:
                sched[n].append(Cell(rx_slot_for(parent, L), parent % C, TX, parent))
    elif kind == "link_based":
        for n in topology.ids:
            parent = topology.parent(n)
            if parent is None:
                continue
            slot = link_slot_for(n, parent, L)
            chan = (n * LINK_MULTIPLIER + parent) % C
            sched[n].append(Cell(slot, chan, TX, parent))
            sched[parent].append(Cell(slot, chan, RX, n))
    else:
        raise ValueError(f"unknown scheduler {kind!r}; choose from {SCHEDULERS}")
    for cells in sched.values():
        cells.sort(key=lambda c: (c.slot_offset, c.direction, c.peer or 0))
    return sched
