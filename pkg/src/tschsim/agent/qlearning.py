"""Tabular action values, expected rewards and the epsilon-greedy learner."""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .config import AgentConfig, Rewards

SKIP = 0
LISTEN = 1
ACTIONS = ("skip", "listen")


class FrozenTableError(RuntimeError):
    pass


@dataclass
class QTable:
    """S x 2 action values; column 0 is SKIP, column 1 is LISTEN.

    Values are held as float32, the precision a deployed table is stored in,
    so a full-precision file round-trips bit for bit.
    """
    values: np.ndarray
    episodes_trained: int = 0
    mode: str = "training"

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.ndim != 2 or self.values.shape[1] != 2:
            raise ValueError(f"Q-table must be S x 2, got {self.values.shape}")
        if self.mode not in ("training", "frozen"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def zeros(cls, n_states: int) -> "QTable":
        return cls(np.zeros((n_states, 2), dtype=np.float32))

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def frozen(self) -> bool:
        return self.mode == "frozen"

    def freeze(self) -> "QTable":
        return QTable(self.values.copy(), self.episodes_trained, "frozen")

    def copy(self) -> "QTable":
        return QTable(self.values.copy(), self.episodes_trained, self.mode)

    def greedy(self, s: int) -> int:
        q_skip, q_listen = self.values[s]
        return SKIP if q_skip > q_listen else LISTEN


def expected_reward(action: int, p: float, rewards: Rewards) -> float:
    if action == SKIP:
        return p * rewards.c_miss + (1.0 - p) * rewards.r_skip
    return p * rewards.r_succ + (1.0 - p) * rewards.c_idle


def apply_penalties(exp_skip_reward: float, overdue: int, near_count: int,
                    cfg: AgentConfig) -> float:
    """Bias the skip expectation away from skipping near or past due senders."""
    r = exp_skip_reward
    if overdue > 0:
        r -= abs(cfg.rewards.c_miss)
    return r - cfg.near_penalty * near_count


def select_action(q: QTable, s: int, epsilon: float, rng: random.Random) -> int:
    if epsilon > 0.0 and rng.random() < epsilon:
        return SKIP if rng.random() < 0.5 else LISTEN
    return q.greedy(s)


def q_update(q: QTable, s: int, a: int, r: float, s_next: int,
             alpha: float, gamma: float) -> float:
    if q.frozen:
        raise FrozenTableError("Q-table is frozen; updates are not allowed")
    row = q.values
    old = float(row[s, a])
    target = r + gamma * float(max(row[s_next, 0], row[s_next, 1]))
    new = old + alpha * (target - old)
    row[s, a] = new
    return new
