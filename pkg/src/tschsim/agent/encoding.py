"""Neighborhood features and the mixed-radix state index."""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

from .config import AgentConfig, BinConfig
from .neighbor import (NeighborStats, StatsError, aggregate_probability, clamp_sigma,
                       neighbor_probability, phase_distance)


class Features(NamedTuple):
    mean_bin: int
    short_count: int
    dmin_bin: int
    near_count: int
    p_any: float        # aggregated, clamped probability of an incoming frame
    overdue: int        # neighbors past mu + zeta*sigma since their last frame


def bin_interarrival(ratio: float, B: int, r_max: float = 2.0) -> int:
    if ratio < 0:
        raise ValueError(f"ratio must be >= 0, got {ratio}")
    return min(B - 1, int(math.floor(ratio * B / r_max)))


def bin_distance(d: float, sigma: float, D: int = 4) -> int:
    """Bin a distance by sigma-unit edges 0.5, 1, 2, 4, ... (D - 1 edges)."""
    edge = 0.5 * sigma
    for k in range(D - 1):
        if d < edge:
            return k
        edge *= 2.0
    return D - 1


def encode_state(mean_bin: int, short_count: int, dmin_bin: int, near_count: int,
                 bins: BinConfig) -> int:
    c = bins.C_max + 1
    mean_bin = min(max(mean_bin, 0), bins.B - 1)
    short_count = min(max(short_count, 0), bins.C_max)
    dmin_bin = min(max(dmin_bin, 0), bins.D - 1)
    near_count = min(max(near_count, 0), bins.C_max)
    return ((mean_bin * c + short_count) * bins.D + dmin_bin) * c + near_count


def decode_state(s: int, bins: BinConfig) -> tuple[int, int, int, int]:
    if not 0 <= s < bins.n_states:
        raise ValueError(f"state {s} outside [0, {bins.n_states})")
    c = bins.C_max + 1
    s, near = divmod(s, c)
    s, dmin = divmod(s, bins.D)
    mean_bin, short = divmod(s, c)
    return mean_bin, short, dmin, near


def extract_features(neighborhood: Sequence[NeighborStats], asn: int,
                     cfg: AgentConfig) -> Features:
    """Reference implementation of the per-decision feature pass.

    The compiled kernel in :mod:`tschsim.kernels` must agree with this
    function on every input; the test-suite checks both.
    """
    if not neighborhood:
        raise StatsError("empty neighborhood")
    bins = cfg.bins
    b_sum = 0
    short = near = overdue = 0
    d_min = math.inf
    sigma_at_min = 1.0
    probs = []
    for st in neighborhood:
        sigma = clamp_sigma(st.mu, st.sigma, cfg.clamp)
        elapsed = asn - st.last_asn
        b = bin_interarrival(elapsed / st.mu, bins.B, bins.r_max)
        b_sum += b
        if b < bins.b_th:
            short += 1
        d = phase_distance(st, asn)
        if d < d_min:
            d_min, sigma_at_min = d, sigma
        if d <= sigma:
            near += 1
        if elapsed >= st.mu + cfg.zeta_miss * sigma:
            overdue += 1
        probs.append(neighbor_probability(st, asn, cfg.clamp))
    mean_bin = min(bins.B - 1, int(math.floor(b_sum / len(neighborhood) + 0.5)))
    return Features(
        mean_bin=mean_bin,
        short_count=min(bins.C_max, short),
        dmin_bin=bin_distance(d_min, sigma_at_min, bins.D),
        near_count=min(bins.C_max, near),
        p_any=aggregate_probability(probs, cfg.eps_p),
        overdue=overdue,
    )
