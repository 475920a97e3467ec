"""Hyperparameters of the adaptive-listening agent."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace


@dataclass(frozen=True)
class Rewards:
    r_succ: float = 1.0
    r_skip: float = 0.5
    c_idle: float = -0.5
    c_miss: float = -1.0
    terminal_succ: float = 5.0
    terminal_fail: float = -5.0


@dataclass(frozen=True)
class ClampConfig:
    alpha_c: float = 0.5     # sigma upper bound, fraction of mu
    beta_c: float = 0.05     # sigma lower bound, fraction of mu
    sigma_min: float = 1.0   # absolute sigma floor, slots


@dataclass(frozen=True)
class BinConfig:
    B: int = 10          # inter-arrival bins
    D: int = 4           # distance bins
    b_th: int = 2        # "short" bin threshold
    C_max: int = 3       # cap on the two neighbor counters
    r_max: float = 2.0   # elapsed/mu ratio covered by the B bins

    @property
    def n_states(self) -> int:
        return self.B * (self.C_max + 1) * self.D * (self.C_max + 1)


@dataclass(frozen=True)
class AgentConfig:
    alpha: float = 0.15
    gamma: float = 0.9
    eps0: float = 1.0
    eps_min: float = 0.05
    eps_decay: float = 0.997
    rewards: Rewards = field(default_factory=Rewards)
    episode_len: int = 500
    lam: float = 0.1
    clamp: ClampConfig = field(default_factory=ClampConfig)
    eps_p: float = 1e-3
    bins: BinConfig = field(default_factory=BinConfig)
    zeta_miss: float = 2.0
    near_penalty: float = 0.1
    rolling_window: int = 10

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if not 0.0 <= self.eps_min <= self.eps0 <= 1.0:
            raise ValueError("need 0 <= eps_min <= eps0 <= 1")
        if not 0.0 < self.eps_p < 0.5:
            raise ValueError("eps_p must be in (0, 0.5)")
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lam must be in (0, 1)")
        if self.episode_len < 1 or self.rolling_window < 1:
            raise ValueError("episode_len and rolling_window must be positive")

    @property
    def n_states(self) -> int:
        return self.bins.n_states

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "AgentConfig":
        doc = dict(doc)
        for name, sub in (("rewards", Rewards), ("clamp", ClampConfig), ("bins", BinConfig)):
            if name in doc and isinstance(doc[name], dict):
                doc[name] = sub(**doc[name])
        return cls(**doc)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_override(self, path: str, value) -> "AgentConfig":
        """Return a copy with a dotted field path (e.g. ``rewards.r_skip``) replaced."""
        head, _, rest = path.partition(".")
        names = {f.name for f in fields(self)}
        if head not in names:
            raise KeyError(f"unknown agent parameter {path!r}")
        if not rest:
            cur = getattr(self, head)
            return replace(self, **{head: type(cur)(value) if not hasattr(cur, "__dataclass_fields__") else value})
        sub = getattr(self, head)
        if not hasattr(sub, "__dataclass_fields__") or rest not in {f.name for f in fields(sub)}:
            raise KeyError(f"unknown agent parameter {path!r}")
        cur = getattr(sub, rest)
        return replace(self, **{head: replace(sub, **{rest: type(cur)(value)})})
