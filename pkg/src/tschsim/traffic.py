"""Application traffic: per-node generation intervals and the named patterns."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .topology import Topology

DEFAULT_JITTER = 0.05


class TrafficError(ValueError):
    pass


@dataclass(frozen=True)
class TrafficProfile:
    mean_interval: float  # seconds
    jitter_fraction: float = DEFAULT_JITTER
    jittered: bool = True

    def __post_init__(self):
        if not self.mean_interval > 0:
            raise TrafficError(f"mean_interval must be > 0, got {self.mean_interval}")
        if self.jitter_fraction < 0:
            raise TrafficError("jitter_fraction must be >= 0")

    @property
    def sigma(self) -> float:
        return self.jitter_fraction * self.mean_interval


def next_interval(profile: TrafficProfile, rng: random.Random) -> float:
    """Draw the next inter-generation gap in seconds.

    Jittered profiles sample N(mu, sigma^2) and redraw until the sample is
    positive, so the shape above zero is preserved rather than clipped.
    """
    if not profile.jittered or profile.sigma == 0.0:
        return float(profile.mean_interval)
    while True:
        x = rng.gauss(profile.mean_interval, profile.sigma)
        if x > 0.0:
            return x


# id -> seconds; ids are looked up against whichever topology is in use
_HETEROGENEOUS = {
    **dict.fromkeys((3, 11, 15, 19), 17.0),
    **dict.fromkeys((4, 12, 16, 20), 30.0),
    **dict.fromkeys((5, 6, 13, 17, 21), 50.0),
    **dict.fromkeys((18, 22), 73.0),
}
_PERIODIC = {
    **dict.fromkeys((3, 11, 15, 19), 17.0),
    **dict.fromkeys((4, 12, 16, 20), 19.0),
    **dict.fromkeys((5, 13, 17, 21), 23.0),
    **dict.fromkeys((18, 22), 29.0),
}

PATTERNS = ("high", "heterogeneous", "sparse", "periodic")


def traffic_pattern(name: str, topology: Topology,
                    jitter_fraction: float = DEFAULT_JITTER) -> dict[int, TrafficProfile]:
    """Map node id -> TrafficProfile for a named pattern.

    ``high`` and ``sparse`` apply to every leaf. ``heterogeneous`` and
    ``periodic`` apply to the listed ids that exist and are not the sink.
    """
    ids = set(topology.ids)
    sink = topology.sink
    if name == "high":
        return {n: TrafficProfile(13.0, jitter_fraction, True) for n in topology.leaves}
    if name == "sparse":
        return {n: TrafficProfile(60.0 if n % 2 == 0 else 73.0, jitter_fraction, True)
                for n in topology.leaves}
    if name in ("heterogeneous", "periodic"):
        table = _HETEROGENEOUS if name == "heterogeneous" else _PERIODIC
        jittered = name == "heterogeneous"
        return {n: TrafficProfile(mu, jitter_fraction, jittered)
                for n, mu in sorted(table.items()) if n in ids and n != sink}
    raise TrafficError(f"unknown traffic pattern {name!r}; choose from {PATTERNS}")


def is_periodic(profiles: dict[int, TrafficProfile]) -> bool:
    return all(not p.jittered or p.jitter_fraction == 0.0 for p in profiles.values())
