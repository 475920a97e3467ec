"""Delivery, latency and energy metrics computed from a finished run."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .energy import (E_BATTERY_COIN_CELL, M3, STATES, EnergyLedger, PlatformCurrents,
                     average_power, lifetime_days, radio_duty_cycle)
from .topology import Topology
from .trace import SlotTrace


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class Delivery:
    delivered: int
    dropped: int
    in_flight: int

    @property
    def pdr(self) -> float:
        done = self.delivered + self.dropped
        return self.delivered / done if done else 1.0


def packet_fates(trace: SlotTrace, origins: Optional[Sequence[int]] = None) -> dict[int, Delivery]:
    """Per-origin counts of packets created at or after warm-up."""
    created: dict[int, int] = {}
    for e in trace.of_kind("gen"):
        if e.asn >= trace.warmup_asn and (origins is None or e.src in origins):
            created[e.seq] = e.src
    delivered = {e.seq for e in trace.of_kind("ack") if e.outcome == "sink"}
    dropped = {e.seq for e in trace if e.kind in ("drop_retry", "drop_queue")}
    per: dict[int, list[int]] = {}
    for seq, origin in created.items():
        c = per.setdefault(origin, [0, 0, 0])
        if seq in delivered:
            c[0] += 1
        elif seq in dropped:
            c[1] += 1
        else:
            c[2] += 1
    return {o: Delivery(*c) for o, c in sorted(per.items())}


def pdr(trace: SlotTrace, topology: Topology) -> float:
    """Delivered over delivered-or-dropped for leaf-originated packets."""
    fates = packet_fates(trace, topology.leaves).values()
    d = sum(f.delivered for f in fates)
    x = sum(f.dropped for f in fates)
    return d / (d + x) if d + x else 1.0


@dataclass(frozen=True)
class LatencyStats:
    count: int
    mean_ms: float
    median_ms: float
    p95_ms: float
    p99_ms: float


def packet_delays(trace: SlotTrace, origins: Optional[Sequence[int]] = None) -> list[int]:
    """End-to-end delays in slots, in delivery order."""
    created = {e.seq: e.asn for e in trace.of_kind("gen")
               if e.asn >= trace.warmup_asn and (origins is None or e.src in origins)}
    return [e.asn - created[e.seq] for e in trace.of_kind("ack")
            if e.outcome == "sink" and e.seq in created]


def latency_stats(trace: SlotTrace, origins: Optional[Sequence[int]] = None) -> LatencyStats:
    delays = packet_delays(trace, origins)
    if not delays:
        raise MetricsError("no delivered packets")
    ms = np.asarray(delays, dtype=np.float64) * trace.timeslot_ms
    return LatencyStats(len(delays), float(ms.mean()), float(np.median(ms)),
                        float(np.percentile(ms, 95)), float(np.percentile(ms, 99)))


def idle_listen_count(trace: SlotTrace, node: int, since: Optional[int] = None) -> int:
    """Slots where ``node`` listened and nothing was addressed to it."""
    start = trace.warmup_asn if since is None else since
    return sum(1 for e in trace.of_kind("rx_idle") if e.dst == node and e.asn >= start)


# -- report ----------------------------------------------------------------

CSV_COLUMNS = ("node", "role", "pdr", "latency_mean_ms", "latency_median_ms", "latency_p95_ms",
               "latency_p99_ms", "power_mw") + tuple(f"power_{s}_mw" for s in STATES) + (
               "rdc", "idle_listen_slots", "lifetime_days")


@dataclass
class NodeMetrics:
    node: int
    role: str
    pdr: Optional[float]
    latency: Optional[LatencyStats]
    power_mw: float
    power_by_state_mw: dict
    rdc: float
    idle_listen_slots: int
    lifetime_days: float

    def row(self) -> dict:
        lat = self.latency
        r = {"node": self.node, "role": self.role, "pdr": self.pdr,
             "latency_mean_ms": lat.mean_ms if lat else None,
             "latency_median_ms": lat.median_ms if lat else None,
             "latency_p95_ms": lat.p95_ms if lat else None,
             "latency_p99_ms": lat.p99_ms if lat else None,
             "power_mw": self.power_mw}
        for s in STATES:
            r[f"power_{s}_mw"] = self.power_by_state_mw[s]
        r.update(rdc=self.rdc, idle_listen_slots=self.idle_listen_slots,
                 lifetime_days=self.lifetime_days)
        return r


@dataclass
class MetricsReport:
    """Per-node rows plus a network row; network power/RDC are node means,
    idle slots a sum and lifetime is that of the worst node."""
    protocol: str
    scenario: str
    seed: int
    nodes: list = field(default_factory=list)
    network: Optional[NodeMetrics] = None

    @property
    def pdr(self) -> float:
        return self.network.pdr

    @property
    def rdc(self) -> float:
        return self.network.rdc

    @property
    def idle_listen_slots(self) -> int:
        return self.network.idle_listen_slots

    def rows(self) -> list[dict]:
        return [n.row() for n in self.nodes] + [self.network.row()]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows():
            w.writerow({k: _fmt(v) for k, v in r.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"protocol": self.protocol, "scenario": self.scenario, "seed": self.seed,
               "network": self.network.row(), "nodes": [n.row() for n in self.nodes]}
        return json.dumps(doc, indent=2) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def build_report(trace: SlotTrace, topology: Topology, ledgers: dict[int, EnergyLedger],
                 protocol: str = "", scenario: str = "", seed: int = 0,
                 currents: PlatformCurrents = M3,
                 battery_joules: float = E_BATTERY_COIN_CELL) -> MetricsReport:
    fates = packet_fates(trace, topology.leaves)
    idle: dict[int, int] = dict.fromkeys(topology.ids, 0)
    for e in trace.of_kind("rx_idle"):
        if e.asn >= trace.warmup_asn:
            idle[e.dst] += 1
    rows = []
    for n in topology.ids:
        f = fates.get(n)
        try:
            lat = latency_stats(trace, [n]) if f else None
        except MetricsError:
            lat = None
        pw = average_power(ledgers[n], currents)
        rows.append(NodeMetrics(n, topology.node(n).role, f.pdr if f else None, lat,
                                pw.total_mw, pw.by_state_mw, radio_duty_cycle(ledgers[n]),
                                idle[n], lifetime_days(pw.total_mw, battery_joules)))
    try:
        net_lat = latency_stats(trace, topology.leaves)
    except MetricsError:
        net_lat = None
    by_state = {s: math.fsum(r.power_by_state_mw[s] for r in rows) / len(rows) for s in STATES}
    net = NodeMetrics("network", "network", pdr(trace, topology), net_lat,
                      math.fsum(r.power_mw for r in rows) / len(rows), by_state,
                      math.fsum(r.rdc for r in rows) / len(rows),
                      sum(idle.values()), min(r.lifetime_days for r in rows))
    return MetricsReport(protocol, scenario, seed, rows, net)


# -- repeats ----------------------------------------------------------------

def mean_ci(values: Sequence[float], confidence: float = 0.95) -> tuple[float, float]:
    """Sample mean and Student-t confidence half-width (0 for a single value)."""
    x = np.asarray([v for v in values if v is not None], dtype=np.float64)
    if x.size == 0:
        return float("nan"), float("nan")
    if x.size == 1:
        return float(x[0]), 0.0
    half = stats.t.ppf(0.5 + confidence / 2, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size)
    return float(x.mean()), float(half)


SUMMARY_METRICS = ("pdr", "latency_mean_ms", "latency_p95_ms", "power_mw", "power_rx_idle_mw",
                   "rdc", "idle_listen_slots", "lifetime_days")


def summarize(reports: Sequence[MetricsReport]) -> dict:
    """Network-level mean and 95% half-width per metric across repeated runs."""
    if not reports:
        raise MetricsError("no reports to summarize")
    out = {}
    for m in SUMMARY_METRICS:
        mean, half = mean_ci([r.network.row()[m] for r in reports])
        out[m] = mean
        out[f"{m}_ci95"] = half
    return out
