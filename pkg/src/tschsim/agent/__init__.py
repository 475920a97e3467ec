"""Adaptive listening agent: neighbor statistics, state encoding, Q-learning."""

from .agent import Agent, AgentError, EpisodeRecord, EpisodeStats, kernel_params
from .config import AgentConfig, BinConfig, ClampConfig, Rewards
from .encoding import (Features, bin_distance, bin_interarrival, decode_state, encode_state,
                       extract_features)
from .neighbor import (NeighborStats, StatsError, aggregate_probability, clamp_sigma,
                       combine_probability, first_reception, neighbor_probability, observe,
                       phase_distance, update_on_miss, update_on_reception)
from .qlearning import (LISTEN, SKIP, FrozenTableError, QTable, apply_penalties,
                        expected_reward, q_update, select_action)

__all__ = [
    "Agent", "AgentError", "EpisodeRecord", "EpisodeStats", "kernel_params",
    "AgentConfig", "BinConfig", "ClampConfig", "Rewards",
    "Features", "bin_distance", "bin_interarrival", "decode_state", "encode_state",
    "extract_features",
    "NeighborStats", "StatsError", "aggregate_probability", "clamp_sigma",
    "combine_probability", "first_reception", "neighbor_probability", "observe",
    "phase_distance", "update_on_miss", "update_on_reception",
    "LISTEN", "SKIP", "FrozenTableError", "QTable", "apply_penalties", "expected_reward",
    "q_update", "select_action",
]
