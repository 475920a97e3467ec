"""Scenario configuration and the train / evaluate / sweep drivers behind the CLI."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence, Union

import yaml

from . import rng as rngmod
from .agent import AgentConfig, QTable
from .engine import Engine, RunResult
from .federate import (TrainedModel, fedavg, load_model, model_from_agents)
from .metrics import MetricsReport, build_report, summarize
from .policies import AlwaysListen, PrilmPolicy, RlAslPolicy
from .schedule import SlotframeConfig
from .topology import Topology, builtin_topology, topology_from_dict
from .traffic import PATTERNS, TrafficProfile, is_periodic, traffic_pattern

# protocol -> (scheduler, listening policy)
PROTOCOLS = {
    "orchestra": ("receiver_based", "always"),
    "orchestra-lb": ("link_based", "always"),
    "prilm": ("receiver_based", "prilm"),
    "rl-asl": ("receiver_based", "rl-asl"),
    "rl-asl-lb": ("link_based", "rl-asl"),
}
MODES = ("train", "eval")
EVAL_DURATION_MS = 3.6e6
TRAIN_DURATION_MS = 1e7
TRAIN_DURATION_FULL_MS = 1e8


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    topology: Union[str, dict] = "simple5"
    traffic: str = "periodic"
    jitter_fraction: float = 0.05
    protocol: str = "orchestra"
    mode: str = "eval"
    slotframe: dict = field(default_factory=dict)
    link_loss: float = 0.0
    duration_ms: Optional[float] = None
    warmup_fraction: float = 0.05
    seed: int = 1
    repeats: int = 1
    agent: dict = field(default_factory=dict)  # dotted path -> value, e.g. rewards.r_skip
    qtable: Optional[str] = None

    def __post_init__(self):
        self.validate(check_files=False)

    # -- validation ---------------------------------------------------------

    def validate(self, check_files: bool = True) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}; choose from {sorted(PROTOCOLS)}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.traffic not in PATTERNS:
            raise ConfigError(f"unknown traffic pattern {self.traffic!r}; choose from {PATTERNS}")
        if not 0.0 <= self.link_loss < 1.0:
            raise ConfigError("link_loss must be in [0, 1)")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigError("warmup_fraction must be in [0, 1)")
        if self.duration_ms is not None and self.duration_ms <= 0:
            raise ConfigError("duration_ms must be positive")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.jitter_fraction < 0:
            raise ConfigError("jitter_fraction must be non-negative")
        try:
            topo = self.topology_obj()
            profiles = self.traffic_profiles(topo)
            self.slotframe_cfg()
            self.agent_cfg()
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.protocol == "prilm" and not is_periodic(profiles):
            raise ConfigError(
                f"prilm needs strictly periodic traffic; pattern {self.traffic!r} is jittered. "
                "Its next-transmission piggyback cannot predict non-periodic senders.")
        if self.mode == "train" and not self.protocol.startswith("rl-asl"):
            raise ConfigError("training applies only to rl-asl and rl-asl-lb")
        if check_files and self.mode == "eval" and self.protocol.startswith("rl-asl"):
            if not self.qtable:
                raise ConfigError(f"{self.protocol} evaluation needs a frozen table (qtable)")
            if not os.path.isfile(self.qtable):
                raise ConfigError(f"qtable file not found: {self.qtable}")

    # -- derived objects ----------------------------------------------------

    def topology_obj(self) -> Topology:
        if isinstance(self.topology, str):
            return builtin_topology(self.topology)
        return topology_from_dict(self.topology)

    def topology_name(self) -> str:
        return self.topology if isinstance(self.topology, str) else "custom"

    def traffic_profiles(self, topo: Optional[Topology] = None) -> dict[int, TrafficProfile]:
        return traffic_pattern(self.traffic, topo or self.topology_obj(), self.jitter_fraction)

    def slotframe_cfg(self) -> SlotframeConfig:
        return SlotframeConfig(**self.slotframe)

    def agent_cfg(self) -> AgentConfig:
        cfg = AgentConfig()
        for path, value in sorted(self.agent.items()):
            cfg = cfg.with_override(path, value)
        return cfg

    def duration_slots(self, full_paper_scale: bool = False) -> int:
        ms = self.duration_ms
        if ms is None:
            if self.mode == "train":
                ms = TRAIN_DURATION_FULL_MS if full_paper_scale else TRAIN_DURATION_MS
            else:
                ms = EVAL_DURATION_MS
        return int(round(ms / self.slotframe_cfg().timeslot_ms))

    def warmup_slots(self, duration: int) -> int:
        return int(self.warmup_fraction * duration)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        if not isinstance(doc, dict):
            raise ConfigError("scenario document must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown scenario keys: {unknown}")
        return cls(**doc)

    @classmethod
    def from_yaml(cls, text: str) -> "ScenarioConfig":
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed scenario file: {exc}") from exc
        return cls.from_dict(doc or {})

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_yaml(fh.read())

    def with_changes(self, **kw) -> "ScenarioConfig":
        doc = self.to_dict()
        doc.update(kw)
        return ScenarioConfig(**doc)


# -- running -------------------------------------------------------------------

def make_engine(cfg: ScenarioConfig, seed: int, qtable: Optional[QTable] = None,
                duration: Optional[int] = None, record_trace: bool = True) -> Engine:
    topo = cfg.topology_obj()
    scheduler, kind = PROTOCOLS[cfg.protocol]
    if kind == "always":
        policy = AlwaysListen()
    elif kind == "prilm":
        policy = PrilmPolicy()
    else:
        policy = RlAslPolicy(cfg.agent_cfg(), qtable, seed)
    duration = cfg.duration_slots() if duration is None else duration
    return Engine(topo, cfg.traffic_profiles(topo), cfg.slotframe_cfg(), scheduler, policy,
                  seed=seed, link_success=1.0 - cfg.link_loss,
                  warmup_slots=cfg.warmup_slots(duration), record_trace=record_trace)


@dataclass
class TrainResult:
    model: TrainedModel
    convergence: list  # (node, EpisodeRecord)

    def convergence_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", "episode", "return", "rolling_mean", "epsilon", "succeeded"])
        for node, rec in self.convergence:
            w.writerow([node, rec.episode, repr(rec.ret), repr(rec.rolling_mean),
                        repr(rec.epsilon), int(rec.succeeded)])
        return buf.getvalue()


def train_model(cfg: ScenarioConfig, full_paper_scale: bool = False,
                label: Optional[str] = None) -> TrainResult:
    """Train one agent per receiving node and merge them into one model."""
    if cfg.mode != "train":
        cfg = cfg.with_changes(mode="train")
    duration = cfg.duration_slots(full_paper_scale)
    eng = make_engine(cfg, cfg.seed, None, duration, record_trace=False)
    eng.run(duration)
    agents = eng.policy.agents
    label = label if label is not None else f"{cfg.topology_name()}:{cfg.traffic}"
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = model_from_agents([agents[n] for n in sorted(agents)], cfg.agent_cfg(), label)
    for w in caught:
        warnings.warn(f"{w.message} (duration {duration} slots)", RuntimeWarning, stacklevel=2)
    series = [(n, rec) for n in sorted(agents) for rec in agents[n].history]
    return TrainResult(model, series)


def train_global_table(cfg: ScenarioConfig, patterns: Sequence[str] = PATTERNS,
                       full_paper_scale: bool = False) -> tuple[QTable, list[TrainedModel]]:
    """One training run per traffic pattern, merged by episode-weighted averaging."""
    models = [train_model(cfg.with_changes(traffic=p, mode="train"), full_paper_scale).model
              for p in patterns]
    return fedavg(models), models


@dataclass
class EvalResult:
    reports: list
    results: list  # RunResult per repeat
    summary: dict

    @property
    def report(self) -> MetricsReport:
        return self.reports[0]


def load_frozen(path, cfg: AgentConfig) -> QTable:
    model = load_model(path, cfg.n_states)
    if model.fingerprint and model.fingerprint != cfg.fingerprint():
        raise ConfigError(f"table {path} was trained with config {model.fingerprint}, "
                          f"evaluation uses {cfg.fingerprint()}")
    q = model.qtable
    return q if q.frozen else q.freeze()


def evaluate(cfg: ScenarioConfig, qtable: Optional[QTable] = None) -> EvalResult:
    """Run ``cfg.repeats`` frozen-policy repeats with derived seeds."""
    if cfg.protocol.startswith("rl-asl") and qtable is None:
        cfg.validate(check_files=True)
        qtable = load_frozen(cfg.qtable, cfg.agent_cfg())
    if qtable is not None and not qtable.frozen:
        qtable = qtable.copy().freeze()
    topo = cfg.topology_obj()
    duration = cfg.duration_slots()
    reports, results = [], []
    for r in range(cfg.repeats):
        seed = cfg.seed if r == 0 else rngmod.repeat_seed(cfg.seed, r)
        eng = make_engine(cfg, seed, qtable, duration)
        res: RunResult = eng.run(duration)
        results.append(res)
        reports.append(build_report(res.trace, topo, res.ledgers, cfg.protocol,
                                    cfg.name, seed))
    return EvalResult(reports, results, summarize(reports))


SWEEP_COLUMNS = ("parameter", "value", "pdr", "pdr_ci95", "latency_mean_ms",
                 "latency_mean_ms_ci95", "rdc", "rdc_ci95", "idle_listen_slots",
                 "idle_listen_slots_ci95")


def sweep(cfg: ScenarioConfig, parameter: str, values: Sequence, retrain: bool = True,
          train_traffic: str = "high", train_duration_ms: Optional[float] = None,
          qtable: Optional[QTable] = None) -> list[dict]:
    """One evaluation per value of an agent parameter; retrains a table per value
    unless ``retrain`` is false (then ``qtable`` is evaluated under each value)."""
    if not values:
        raise ConfigError("sweep needs at least one value")
    AgentConfig().with_override(parameter, values[0])  # rejects unknown paths early
    rows = []
    for v in values:
        point = cfg.with_changes(agent={**cfg.agent, parameter: v})
        q = qtable
        if retrain:
            tcfg = point.with_changes(mode="train", traffic=train_traffic,
                                      duration_ms=train_duration_ms,
                                      protocol=point.protocol if point.protocol.startswith(
                                          "rl-asl") else "rl-asl")
            q = train_model(tcfg).model.qtable.freeze()
        if q is None:
            raise ConfigError("sweep without retraining needs a table")
        res = evaluate(point, q)
        s = res.summary
        rows.append({"parameter": parameter, "value": v,
                     **{k: s[k] for k in SWEEP_COLUMNS[2:]}})
    return rows


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def write_atomic(path, data: Union[str, bytes]) -> None:
    """Write via a temporary file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": "\n"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def relative_spread(values: Sequence[float]) -> float:
    """(max - min) / mean, used for the sweep stability check."""
    m = math.fsum(values) / len(values)
    return (max(values) - min(values)) / m
