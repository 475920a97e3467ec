"""Slot-by-slot simulation of the unicast slotframe."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

from . import rng as rngmod
from .energy import EnergyLedger, SlotCounters, ledger_from_counters
from .schedule import TX, Cell, SlotframeConfig, build_schedule
from .topology import Topology
from .trace import Event, SlotTrace
from .traffic import TrafficProfile, next_interval

MIN_BE, MAX_BE = 1, 5

UNSYNCED, SYNCED = "unsynced", "synced"


@dataclass
class PacketRecord:
    seq: int
    origin: int
    hop_src: int
    hop_dst: int
    created_asn: int
    delivered_asn: Optional[int] = None
    retries_used: int = 0


@dataclass(frozen=True)
class HandshakeState:
    phase: str = UNSYNCED

    @property
    def synced(self) -> bool:
        return self.phase == SYNCED


def two_h_observe(state: HandshakeState, event: str) -> HandshakeState:
    """Advance a link's handshake: an ack syncs it, a parent change resets it."""
    if event == "ack_received":
        return HandshakeState(SYNCED)
    if event == "parent_changed":
        return HandshakeState(UNSYNCED)
    raise ValueError(f"unknown handshake event {event!r}")


class ListeningPolicy:
    """Decides whether a node's radio is on in its scheduled Rx cell.

    Non-adaptive policies always listen. For adaptive ones the engine
    first applies the handshake gate and calls :meth:`decide` only when
    every inbound link of the cell is synced.
    """
    name = "always"
    adaptive = False

    def attach(self, engine: "Engine") -> None:
        self.engine = engine

    def decide(self, node: int, asn: int, cell: Cell, senders: list[int]) -> bool:
        return True

    def on_rx(self, node: int, asn: int, decided: bool, sender: Optional[int]) -> None:
        """Called for every listened slot; ``sender`` is set on a good reception."""


class Engine:
    def __init__(self, topology: Topology, traffic: dict[int, TrafficProfile],
                 cfg: SlotframeConfig = SlotframeConfig(),
                 scheduler: str = "receiver_based",
                 policy: Optional[ListeningPolicy] = None,
                 seed: int = 0, link_success: float | dict = 1.0,
                 warmup_slots: int = 0, record_trace: bool = True):
        self.topology = topology
        self.cfg = cfg
        self.scheduler = scheduler
        self.traffic = dict(traffic)
        self.seed = seed
        self.link_success = link_success
        self.warmup = int(warmup_slots)
        self.record = record_trace
        self.policy = policy or ListeningPolicy()
        self.schedule = build_schedule(topology, scheduler, cfg)
        self.asn = 0

        ids = topology.ids
        self.queues: dict[int, deque] = {n: deque() for n in ids}
        self.counters = {n: SlotCounters() for n in ids}
        self.backoff = dict.fromkeys(ids, 0)
        self.be = dict.fromkeys(ids, MIN_BE)
        self.handshake: dict[tuple[int, int], HandshakeState] = {}
        for n in ids:
            p = topology.parent(n)
            if p is not None:
                self.handshake[(n, p)] = HandshakeState()
        self.trace = SlotTrace(cfg.timeslot_ms, cfg.length, topology.sink, self.warmup)
        self.generated = dict.fromkeys(ids, 0)
        self.delivered = dict.fromkeys(ids, 0)
        self.dropped_retry = dict.fromkeys(ids, 0)
        self.dropped_queue = dict.fromkeys(ids, 0)
        self._seq = 0

        self._loss_rng = {n: rngmod.stream(seed, n, "loss") for n in ids}
        self._backoff_rng = {n: rngmod.stream(seed, n, "backoff") for n in ids}
        self._traffic_rng = {n: rngmod.stream(seed, n, "traffic") for n in self.traffic}
        self._gen_time: dict[int, float] = {}
        self.next_gen_asn: dict[int, int] = {}
        self._gen_heap: list[tuple[int, int]] = []
        for n, prof in sorted(self.traffic.items()):
            # first packet at a uniformly random phase within one period
            t0 = rngmod.stream(seed, n, "phase").random() * prof.mean_interval
            self._gen_time[n] = t0
            g = self._to_asn(t0)
            self.next_gen_asn[n] = g
            heapq.heappush(self._gen_heap, (g, n))

        L = cfg.length
        self._tx_at: list[list[tuple[int, Cell]]] = [[] for _ in range(L)]
        self._rx_at: list[list[tuple[int, list[Cell]]]] = [[] for _ in range(L)]
        rx_tmp: dict[tuple[int, int], list[Cell]] = {}
        for n in ids:
            for c in self.schedule[n]:
                if c.direction == TX:
                    self._tx_at[c.slot_offset].append((n, c))
                else:
                    rx_tmp.setdefault((c.slot_offset, n), []).append(c)
        for (slot, n), cells in sorted(rx_tmp.items()):
            self._rx_at[slot].append((n, cells))
        self._active = [bool(self._tx_at[s] or self._rx_at[s]) for s in range(L)]
        self._active_slots = [s for s in range(L) if self._active[s]]
        self.policy.attach(self)

    # -- helpers --------------------------------------------------------

    def _to_asn(self, t_s: float) -> int:
        return int(math.floor(t_s * 1000.0 / self.cfg.timeslot_ms + 1e-9))

    def _emit(self, *fields) -> None:
        if self.record:
            self.trace.events.append(Event(*fields))

    def _success_prob(self, src: int, dst: int) -> float:
        ls = self.link_success
        if isinstance(ls, dict):
            return ls.get((src, dst), ls.get("default", 1.0))
        return ls

    def senders_for(self, node: int, cell: Cell) -> list[int]:
        if cell.peer is None:
            return self.topology.children(node)
        return [cell.peer]

    def link_synced(self, src: int, dst: int) -> bool:
        hs = self.handshake.get((src, dst))
        return hs is not None and hs.synced

    def change_parent(self, node: int, new_parent: int) -> None:
        """Reset the handshake of ``node``'s uplink (routing-driven parent switch)."""
        old = self.topology.parent(node)
        if old is not None:
            self.handshake[(node, old)] = two_h_observe(
                self.handshake.get((node, old), HandshakeState()), "parent_changed")
        self.handshake[(node, new_parent)] = HandshakeState()

    def _enqueue(self, node: int, pkt: PacketRecord, a: int) -> None:
        q = self.queues[node]
        if len(q) >= self.cfg.queue_capacity:
            self.dropped_queue[pkt.origin] += 1
            self._emit(a, a % self.cfg.length, -1, node, pkt.hop_dst, "drop_queue", pkt.seq, "-")
            return
        q.append(pkt)

    def _generate_until(self, a: int) -> None:
        heap = self._gen_heap
        while heap and heap[0][0] <= a:
            g, n = heapq.heappop(heap)
            parent = self.topology.parent(n)
            self._seq += 1
            pkt = PacketRecord(self._seq, n, n, parent, g)
            self.generated[n] += 1
            self._emit(g, g % self.cfg.length, -1, n, parent, "gen", pkt.seq, "-")
            self._enqueue(n, pkt, g)
            self._gen_time[n] += next_interval(self.traffic[n], self._traffic_rng[n])
            g2 = self._to_asn(self._gen_time[n])
            self.next_gen_asn[n] = g2
            heapq.heappush(heap, (g2, n))

    # -- one slot -------------------------------------------------------

    def _listen(self, node: int, a: int, cell: Cell) -> tuple[bool, bool]:
        """(radio on, decided by the policy) for ``node``'s Rx cell at ``a``."""
        pol = self.policy
        if not pol.adaptive:
            return True, False
        senders = self.senders_for(node, cell)
        if not senders:
            return False, False
        for s in senders:
            if not self.link_synced(s, node):
                return True, False
        if a >= self.warmup:
            self.counters[node].decisions += 1
        return pol.decide(node, a, cell, senders), True

    def _process(self, a: int) -> None:
        L = self.cfg.length
        slot = a % L
        self._generate_until(a)
        if not self._active[slot]:
            return
        count = a >= self.warmup
        sf = a // L

        txs = []
        transmitting = set()
        for node, cell in self._tx_at[slot]:
            q = self.queues[node]
            if not q or node in transmitting:
                continue
            if self.backoff[node] > 0:
                self.backoff[node] -= 1
                continue
            txs.append((node, cell, q[0]))
            transmitting.add(node)

        listening: dict[int, tuple[Cell, bool]] = {}
        for node, cells in self._rx_at[slot]:
            if node in transmitting:
                continue
            cell = cells[sf % len(cells)]
            on, decided = self._listen(node, a, cell)
            if on:
                listening[node] = (cell, decided)
            else:
                if count:
                    self.counters[node].skip_slots += 1
                self._emit(a, slot, cell.channel_offset, -1, node, "skip", -1,
                           "policy" if self.policy.adaptive and self.senders_for(node, cell) else "no_link")

        # how many frames reach each listening receiver on its channel
        heard: dict[int, int] = {}
        addressed = set()
        for node, cell, pkt in txs:
            dst = pkt.hop_dst
            addressed.add(dst)
            lc = listening.get(dst)
            if lc is not None and lc[0].channel_offset == cell.channel_offset:
                heard[dst] = heard.get(dst, 0) + 1

        outcomes = []
        received_from: dict[int, int] = {}
        for node, cell, pkt in txs:
            dst = pkt.hop_dst
            n_heard = heard.get(dst, 0)
            if dst not in listening or listening[dst][0].channel_offset != cell.channel_offset:
                outcome = "no_rx"
            elif n_heard > 1:
                outcome = "collision"
            elif self._loss_rng[node].random() < self._success_prob(node, dst):
                outcome = "ok"
                received_from[dst] = node
            else:
                outcome = "lost"
            outcomes.append(outcome)
            if count:
                self.counters[node].tx_slots += 1
            self._emit(a, slot, cell.channel_offset, node, dst, "tx", pkt.seq, outcome)

        for node, (cell, decided) in listening.items():
            if node in addressed:
                if count:
                    self.counters[node].rx_receive_slots += 1
            else:
                if count:
                    self.counters[node].rx_idle_slots += 1
                self._emit(a, slot, cell.channel_offset, -1, node, "rx_idle", -1, "-")
            self.policy.on_rx(node, a, decided, received_from.get(node))

        sink = self.topology.sink
        for (node, cell, pkt), outcome in zip(txs, outcomes):
            q = self.queues[node]
            dst = pkt.hop_dst
            if outcome == "ok":
                self.handshake[(node, dst)] = two_h_observe(
                    self.handshake.get((node, dst), HandshakeState()), "ack_received")
                q.popleft()
                self.be[node] = MIN_BE
                self.backoff[node] = 0
                self._emit(a, slot, cell.channel_offset, dst, node, "ack", pkt.seq,
                           "sink" if dst == sink else "fwd")
                if dst == sink:
                    pkt.delivered_asn = a
                    self.delivered[pkt.origin] += 1
                else:
                    fwd = PacketRecord(pkt.seq, pkt.origin, dst, self.topology.parent(dst),
                                       pkt.created_asn)
                    self._enqueue(dst, fwd, a)
            else:
                pkt.retries_used += 1
                if pkt.retries_used > self.cfg.max_retries:
                    q.popleft()
                    self.dropped_retry[pkt.origin] += 1
                    self.be[node] = MIN_BE
                    self.backoff[node] = 0
                    self._emit(a, slot, cell.channel_offset, node, dst, "drop_retry", pkt.seq, "-")
                else:
                    window = (1 << self.be[node]) - 1
                    self.backoff[node] = self._backoff_rng[node].randint(0, window)
                    self.be[node] = min(self.be[node] + 1, MAX_BE)

    # -- public ---------------------------------------------------------

    def step_slot(self) -> list[Event]:
        """Simulate the slot at the current ASN and advance by one."""
        start = len(self.trace.events)
        a = self.asn
        self._process(a)
        if a >= self.warmup:
            for c in self.counters.values():
                c.slots += 1
        self.asn = a + 1
        self.trace.horizon_asn = self.asn
        return self.trace.events[start:]

    def run(self, duration: int) -> "RunResult":
        """Advance ``duration`` slots, visiting only slots where something happens."""
        if duration <= 0:
            raise ValueError("duration must be positive")
        L = self.cfg.length
        end = self.asn + duration
        active = self._active_slots
        a = self.asn
        while a < end:
            self._process(a)
            slot = a % L
            # jump to the next active slot offset or pending generation
            nxt = None
            for s in active:
                if s > slot:
                    nxt = a - slot + s
                    break
            if nxt is None:
                nxt = a - slot + L + (active[0] if active else 0)
            if self._gen_heap and self._gen_heap[0][0] < nxt:
                nxt = max(a + 1, self._gen_heap[0][0])
            a = nxt
        self._generate_until(end - 1)
        counted = max(0, end - max(self.asn, self.warmup))
        for c in self.counters.values():
            c.slots += counted
        self.asn = end
        self.trace.horizon_asn = end
        return self.result()

    def ledger(self, node: int) -> EnergyLedger:
        return ledger_from_counters(self.counters[node], self.cfg.timeslot_s,
                                    self.cfg.overhead_duty)

    def in_flight(self) -> dict[int, int]:
        out = dict.fromkeys(self.topology.ids, 0)
        for q in self.queues.values():
            for pkt in q:
                out[pkt.origin] += 1
        return out

    def result(self) -> "RunResult":
        return RunResult(self.trace, {n: self.ledger(n) for n in self.topology.ids},
                         {n: SlotCounters(**vars(c)) for n, c in self.counters.items()})


@dataclass
class RunResult:
    trace: SlotTrace
    ledgers: dict[int, EnergyLedger]
    counters: dict[int, SlotCounters]
