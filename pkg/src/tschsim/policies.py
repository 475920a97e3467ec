"""Receive-slot listening policies: always-on, PRIL-M piggyback, and the learned agent."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import rng as rngmod
from .agent import LISTEN, Agent, AgentConfig, QTable
from .engine import Engine, ListeningPolicy
from .schedule import Cell


class AlwaysListen(ListeningPolicy):
    name = "always"


@dataclass
class PrilmState:
    next_tx_asn: dict = field(default_factory=dict)  # sender -> announced ASN


def prilm_decide(state: PrilmState, asn: int, senders=None) -> bool:
    """True (listen) unless every sender announced a later transmission."""
    ids = state.next_tx_asn.keys() if senders is None else senders
    for s in ids:
        nxt = state.next_tx_asn.get(s)
        if nxt is None or nxt <= asn:
            return True
    return False


class PrilmPolicy(ListeningPolicy):
    """Receivers sleep until the ASN the sender piggybacked on its last frame.

    The announced value is the earliest ASN the sender can have a new frame:
    the next slot if its queue is not empty after this frame, otherwise the
    earlier of its own next generation and the earliest announcement it
    holds from its own senders. Only meaningful for strictly periodic traffic.
    """
    name = "prilm"
    adaptive = True

    def attach(self, engine: Engine) -> None:
        super().attach(engine)
        self.states = {n: PrilmState() for n in engine.topology.ids}

    def piggyback(self, sender: int, asn: int) -> Optional[int]:
        eng = self.engine
        if len(eng.queues[sender]) > 1:
            return asn + 1
        candidates = []
        if sender in eng.next_gen_asn:
            candidates.append(eng.next_gen_asn[sender])
        for child in eng.topology.children(sender):
            nxt = self.states[sender].next_tx_asn.get(child)
            if nxt is None:
                return None
            candidates.append(nxt)
        return min(candidates) if candidates else None

    def decide(self, node: int, asn: int, cell: Cell, senders: list[int]) -> bool:
        return prilm_decide(self.states[node], asn, senders)

    def on_rx(self, node: int, asn: int, decided: bool, sender: Optional[int]) -> None:
        if sender is not None:
            self.states[node].next_tx_asn[sender] = self.piggyback(sender, asn)


class RlAslPolicy(ListeningPolicy):
    """One :class:`Agent` per receiving node.

    With ``qtable=None`` every agent trains its own zero-initialised table;
    with a frozen table all agents share it read-only.
    """
    name = "rl-asl"
    adaptive = True

    def __init__(self, cfg: AgentConfig = AgentConfig(), qtable: Optional[QTable] = None,
                 seed: int = 0):
        if qtable is not None and not qtable.frozen:
            raise ValueError("evaluation requires a frozen table")
        self.cfg = cfg
        self.qtable = qtable
        self.seed = seed
        self.agents: dict[int, Agent] = {}

    def agent(self, node: int) -> Agent:
        ag = self.agents.get(node)
        if ag is None:
            ag = Agent(self.cfg, self.qtable, rngmod.stream(self.seed, node, "policy"))
            self.agents[node] = ag
        return ag

    def decide(self, node: int, asn: int, cell: Cell, senders: list[int]) -> bool:
        return self.agent(node).on_rx_slot(asn, senders) == LISTEN

    def on_rx(self, node: int, asn: int, decided: bool, sender: Optional[int]) -> None:
        ag = self.agent(node)
        if decided:
            ag.report_outcome(asn, sender is not None, sender)
        elif sender is not None:
            ag.observe(sender, asn)

    def trained_agents(self) -> dict[int, Agent]:
        return {n: a for n, a in sorted(self.agents.items()) if a.q.episodes_trained > 0}
