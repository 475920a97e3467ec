"""Per-node listen/skip agent driven by the engine's receive-slot callbacks."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .. import kernels
from .config import AgentConfig
from .encoding import Features, encode_state
from .neighbor import NeighborStats, clamp_sigma, observe, update_on_miss
from .qlearning import LISTEN, SKIP, QTable, apply_penalties, expected_reward, q_update, select_action


class AgentError(RuntimeError):
    pass


@dataclass
class EpisodeStats:
    step: int = 0
    ret: float = 0.0
    rolling: deque = field(default_factory=deque)
    best_rolling: float = float("-inf")
    epsilon: float = 1.0
    misses: int = 0


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    ret: float
    rolling_mean: float
    epsilon: float       # exploration rate used during this episode
    succeeded: bool
    checkpoint: bool     # rolling mean reached a new maximum


@dataclass
class _Pending:
    asn: int
    state: int
    learn: bool
    p_any: float = 0.0


def kernel_params(cfg: AgentConfig) -> tuple:
    b, c = cfg.bins, cfg.clamp
    return (b.B, b.D, b.b_th, b.C_max, b.r_max, c.alpha_c, c.beta_c, c.sigma_min,
            cfg.eps_p, cfg.zeta_miss)


class Agent:
    """Listen/skip decisions for one node's unicast receive slots.

    In training mode the agent owns its Q-table and explores; with a frozen
    table it only looks up the greedy action and never writes.
    """

    def __init__(self, cfg: AgentConfig, qtable: Optional[QTable] = None,
                 rng: Optional[random.Random] = None):
        self.cfg = cfg
        self.q = qtable if qtable is not None else QTable.zeros(cfg.n_states)
        if self.q.n_states != cfg.n_states:
            raise AgentError(f"table has {self.q.n_states} states, config expects {cfg.n_states}")
        self.rng = rng or random.Random(0)
        self.neighbors: dict[int, NeighborStats] = {}
        self.episode = EpisodeStats(epsilon=cfg.eps0)
        self.history: list[EpisodeRecord] = []
        self.decisions = 0
        self._pending: Optional[_Pending] = None
        self._last_asn = -1
        self._params = kernel_params(cfg)

    @property
    def training(self) -> bool:
        return not self.q.frozen

    @property
    def epsilon(self) -> float:
        return self.episode.epsilon if self.training else 0.0

    # -- statistics -----------------------------------------------------

    def observe(self, sender: int, asn: int) -> None:
        """Record a frame heard from ``sender`` (also on forced-listen slots)."""
        self.neighbors[sender] = observe(self.neighbors.get(sender), asn, self.cfg.lam)

    def _detect_misses(self, ids: Iterable[int], asn: int) -> None:
        zeta, clamp = self.cfg.zeta_miss, self.cfg.clamp
        for nid in ids:
            st = self.neighbors[nid]
            sigma = clamp_sigma(st.mu, st.sigma, clamp)
            while asn >= st.expected_asn + zeta * sigma:
                st = update_on_miss(st)
                self.episode.misses += 1
            self.neighbors[nid] = st

    def features(self, ids: Iterable[int], asn: int) -> Features:
        flat = []
        for nid in ids:
            st = self.neighbors[nid]
            flat += (st.last_asn, st.mu, st.var, st.expected_asn)
        return Features(*kernels.neighbor_features(float(asn), flat, self._params))

    # -- decision loop --------------------------------------------------

    def on_rx_slot(self, asn: int, neighbor_ids: Optional[Iterable[int]] = None) -> int:
        """Decide SKIP or LISTEN for the receive slot at ``asn``.

        ``neighbor_ids`` restricts the neighborhood (e.g. to one link's
        sender); by default every neighbor heard so far counts. A LISTEN
        decision stays pending until :meth:`report_outcome`.
        """
        if asn == self._last_asn:
            raise AgentError(f"receive slot at ASN {asn} already decided")
        if self._pending is not None:
            raise AgentError(f"outcome of ASN {self._pending.asn} never reported")
        self._last_asn = asn
        ids = sorted(self.neighbors) if neighbor_ids is None else list(neighbor_ids)
        if not ids or any(nid not in self.neighbors or not self.neighbors[nid].ready
                          for nid in ids):
            self._pending = _Pending(asn, -1, learn=False)
            return LISTEN

        self._detect_misses(ids, asn)
        f = self.features(ids, asn)
        s = encode_state(f.mean_bin, f.short_count, f.dmin_bin, f.near_count, self.cfg.bins)
        self.decisions += 1
        a = select_action(self.q, s, self.epsilon, self.rng)
        if a == SKIP:
            if self.training:
                r = expected_reward(SKIP, f.p_any, self.cfg.rewards)
                r = apply_penalties(r, f.overdue, f.near_count, self.cfg)
                q_update(self.q, s, SKIP, r, s, self.cfg.alpha, self.cfg.gamma)
                self._bookkeep(r)
            return SKIP
        self._pending = _Pending(asn, s, learn=self.training, p_any=f.p_any)
        return LISTEN

    def report_outcome(self, asn: int, received: bool, sender: Optional[int] = None) -> None:
        pend = self._pending
        if pend is None or pend.asn != asn:
            raise AgentError(f"no pending listen decision for ASN {asn}")
        self._pending = None
        if pend.learn:
            if received:
                r = self.cfg.rewards.r_succ
            else:
                # nothing arrived, so the statistics are unchanged and p is as before
                r = expected_reward(LISTEN, pend.p_any, self.cfg.rewards)
            q_update(self.q, pend.state, LISTEN, r, pend.state, self.cfg.alpha, self.cfg.gamma)
        if received and sender is not None:
            self.observe(sender, asn)
        if pend.learn:
            self._bookkeep(r)

    def _bookkeep(self, r: float) -> None:
        ep = self.episode
        ep.step += 1
        ep.ret += r
        if ep.step >= self.cfg.episode_len:
            self.end_episode(succeeded=ep.misses == 0)

    def end_episode(self, succeeded: bool) -> EpisodeRecord:
        """Close the running episode: terminal bonus, rolling mean, epsilon decay."""
        cfg, ep = self.cfg, self.episode
        ret = ep.ret + (cfg.rewards.terminal_succ if succeeded else cfg.rewards.terminal_fail)
        ep.rolling.append(ret)
        if len(ep.rolling) > cfg.rolling_window:
            ep.rolling.popleft()
        rolling_mean = sum(ep.rolling) / len(ep.rolling)
        checkpoint = rolling_mean > ep.best_rolling
        if checkpoint:
            ep.best_rolling = rolling_mean
        rec = EpisodeRecord(len(self.history) + 1, ret, rolling_mean, ep.epsilon,
                            succeeded, checkpoint)
        self.history.append(rec)
        self.q.episodes_trained += 1
        ep.epsilon = max(cfg.eps_min, cfg.eps_decay * ep.epsilon)
        ep.step = 0
        ep.ret = 0.0
        ep.misses = 0
        return rec
