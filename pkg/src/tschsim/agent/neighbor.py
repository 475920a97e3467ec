"""Per-neighbor inter-arrival statistics and the transmission-probability kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .config import ClampConfig


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class NeighborStats:
    """What a receiver knows about one sender.

    ``mu`` and ``var`` are in slots and slots^2. They only become meaningful
    after the second reception (``receptions >= 2``); before that the
    neighbor is still bootstrapping.
    """
    last_asn: int
    mu: float = 0.0
    var: float = 0.0
    expected_asn: float = 0.0
    miss_count: int = 0
    receptions: int = 1

    @property
    def ready(self) -> bool:
        return self.receptions >= 2

    @property
    def sigma(self) -> float:
        return math.sqrt(self.var)


def first_reception(asn: int) -> NeighborStats:
    return NeighborStats(last_asn=asn, expected_asn=float(asn))


def update_on_reception(stats: NeighborStats, asn: int, lam: float) -> NeighborStats:
    """EWMA update of mean and variance after hearing the neighbor at ``asn``."""
    if asn <= stats.last_asn:
        raise StatsError(f"reception at ASN {asn} does not follow {stats.last_asn}")
    delta = asn - stats.last_asn
    mu = (1.0 - lam) * stats.mu + lam * delta
    var = (1.0 - lam) * stats.var + lam * (delta - mu) ** 2
    return NeighborStats(last_asn=asn, mu=mu, var=var, expected_asn=asn + mu,
                         miss_count=0, receptions=stats.receptions + 1)


def observe(stats: NeighborStats | None, asn: int, lam: float) -> NeighborStats:
    """Fold a reception into ``stats``, handling the two bootstrap receptions.

    The second reception seeds ``mu`` with the first gap and zero variance;
    later receptions go through :func:`update_on_reception`.
    """
    if stats is None:
        return first_reception(asn)
    if stats.receptions == 1:
        if asn <= stats.last_asn:
            raise StatsError(f"reception at ASN {asn} does not follow {stats.last_asn}")
        gap = float(asn - stats.last_asn)
        return NeighborStats(last_asn=asn, mu=gap, var=0.0, expected_asn=asn + gap,
                             miss_count=0, receptions=2)
    return update_on_reception(stats, asn, lam)


def update_on_miss(stats: NeighborStats) -> NeighborStats:
    return replace(stats, expected_asn=stats.expected_asn + stats.mu,
                   miss_count=stats.miss_count + 1)


def clamp_sigma(mu: float, sigma: float, clamp: ClampConfig) -> float:
    # the upper bound wins when alpha*mu < max(sigma_min, beta*mu)
    return min(clamp.alpha_c * mu, max(clamp.sigma_min, clamp.beta_c * mu, sigma))


def phase_distance(stats: NeighborStats, asn: float) -> float:
    """Distance in slots from ``asn`` to the nearest predicted transmission instant."""
    mu = stats.mu
    phi = (asn - max(stats.last_asn, stats.expected_asn)) % mu  # floored modulo
    return min(phi, mu - phi)


def neighbor_probability(stats: NeighborStats, asn: float, clamp: ClampConfig) -> float:
    d = phase_distance(stats, asn)
    sigma = clamp_sigma(stats.mu, stats.sigma, clamp)
    return math.exp(-0.5 * d * d / (sigma * sigma))


def combine_probability(probs: Sequence[float]) -> float:
    """Probability that at least one neighbor transmits (no clamping)."""
    none = 1.0
    for p in probs:
        none *= 1.0 - p
    return 1.0 - none


def aggregate_probability(probs: Sequence[float], eps_p: float = 1e-3) -> float:
    if len(probs) == 0:
        raise StatsError("no neighbors: the caller must listen instead of aggregating")
    p = combine_probability(probs)
    return min(1.0 - eps_p, max(eps_p, p))
