"""Weighted averaging of Q-tables, fixed-point quantization and the table file format.

File layout (little-endian)::

    16 B  header   magic b"TSCHQTAB", u16 version, u16 flags, u32 reserved
     4 B  S        number of states
     4 B  A        number of actions
     4 B  scale    0 for float32 payload, else int16 fixed-point scale
     8 B  episodes u64
     8 B  fingerprint (8 raw bytes of the agent-config digest)
     1 B  label length, then the label (utf-8)
          payload  S x A values, row-major

flags: bit 0 = frozen.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .agent import AgentConfig, QTable, decode_state
from .agent.config import BinConfig

MAGIC = b"TSCHQTAB"
VERSION = 1
INT16_MAX = 32767
_HEAD = struct.Struct("<8sHHI")
_META = struct.Struct("<IIIQ8sB")


class FederateError(ValueError):
    pass


class TableFormatError(ValueError):
    pass


class TableVersionError(TableFormatError):
    pass


@dataclass
class TrainedModel:
    qtable: QTable
    episodes: int
    label: str = ""
    fingerprint: str = ""


@dataclass
class QuantizedTable:
    scale: int
    values: np.ndarray  # int16, S x 2
    episodes_trained: int = 0

    def __post_init__(self):
        if self.scale <= 0:
            raise FederateError("scale must be a positive integer")
        self.values = np.ascontiguousarray(self.values, dtype=np.int16)


def fedavg(models: Sequence[TrainedModel]) -> QTable:
    """Episode-weighted elementwise mean of the models' tables (frozen result)."""
    if not models:
        raise FederateError("fedavg needs at least one model")
    shape = models[0].qtable.values.shape
    fp = models[0].fingerprint
    for m in models[1:]:
        if m.qtable.values.shape != shape:
            raise FederateError(f"table shapes differ: {shape} vs {m.qtable.values.shape}")
        if m.fingerprint != fp:
            raise FederateError(f"config fingerprints differ: {fp!r} vs {m.fingerprint!r}")
    if any(m.episodes < 0 for m in models):
        raise FederateError("episode counts must be non-negative")
    total = sum(m.episodes for m in models)
    if total <= 0:
        raise FederateError("models carry no training episodes")
    # E_i * Q_i is exact in float64 for float32 Q and E < 2**29; fsum makes the
    # sum order-independent, so the result is permutation invariant
    stacked = [m.qtable.values.astype(np.float64).ravel() for m in models]
    weights = [float(m.episodes) for m in models]
    out = np.empty(stacked[0].size, dtype=np.float64)
    for k in range(out.size):
        out[k] = math.fsum(w * v[k] for w, v in zip(weights, stacked)) / total
    return QTable(out.reshape(shape), episodes_trained=total, mode="frozen")


def fedavg_weights(models: Sequence[TrainedModel]) -> list[Fraction]:
    total = sum(m.episodes for m in models)
    return [Fraction(m.episodes, total) for m in models]


def quantize(q: QTable, scale: int = 10) -> QuantizedTable:
    scaled = np.rint(q.values.astype(np.float64) * scale)
    if np.abs(scaled).max(initial=0.0) > INT16_MAX:
        raise FederateError(
            f"|Q| up to {np.abs(q.values).max():.3f} overflows int16 at scale {scale}")
    return QuantizedTable(scale, scaled.astype(np.int16), q.episodes_trained)


def dequantize(qt: QuantizedTable) -> QTable:
    return QTable(qt.values.astype(np.float64) / qt.scale, qt.episodes_trained, "frozen")


def argmax_flips(q: QTable, qt: QuantizedTable) -> int:
    """States whose greedy action changes after quantization (resolution loss)."""
    before = q.values[:, 0] > q.values[:, 1]
    after = qt.values[:, 0] > qt.values[:, 1]
    return int(np.count_nonzero(before != after))


# -- files ---------------------------------------------------------------

TableLike = Union[QTable, QuantizedTable, TrainedModel]


def table_bytes(table: TableLike, label: str = "", fingerprint: str = "") -> bytes:
    """Serialize a table (or a model, whose label and fingerprint win)."""
    if isinstance(table, TrainedModel):
        label, fingerprint = table.label, table.fingerprint
        episodes, inner = table.episodes, table.qtable
    else:
        inner = table
        episodes = table.episodes_trained
    if isinstance(inner, QuantizedTable):
        scale, payload, flags = inner.scale, inner.values.astype("<i2"), 1
    else:
        scale, payload, flags = 0, inner.values.astype("<f4"), 1 if inner.frozen else 0
    lbl = label.encode()
    if len(lbl) > 255:
        raise FederateError("label longer than 255 bytes")
    fp = bytes.fromhex(fingerprint)[:8].ljust(8, b"\0") if fingerprint else b"\0" * 8
    S, A = payload.shape
    return (_HEAD.pack(MAGIC, VERSION, flags, 0)
            + _META.pack(S, A, scale, episodes, fp, len(lbl)) + lbl
            + np.ascontiguousarray(payload).tobytes())


def save_table(table: TableLike, path, label: str = "", fingerprint: str = "") -> int:
    """Write ``table`` to ``path``; returns the number of bytes written."""
    blob = table_bytes(table, label, fingerprint)
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


@dataclass
class TableFile:
    table: Union[QTable, QuantizedTable]
    episodes: int
    label: str
    fingerprint: str
    frozen: bool


def read_table_file(path, expected_states: int | None = None) -> TableFile:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise TableVersionError(f"{path}: not a Q-table file (bad magic)")
    if len(blob) < _HEAD.size + _META.size:
        raise TableFormatError(f"{path}: truncated header")
    _, version, flags, _ = _HEAD.unpack_from(blob, 0)
    if version != VERSION:
        raise TableVersionError(f"{path}: unsupported version {version}, expected {VERSION}")
    S, A, scale, episodes, fp, nlbl = _META.unpack_from(blob, _HEAD.size)
    off = _HEAD.size + _META.size
    label = blob[off:off + nlbl].decode()
    off += nlbl
    width = 2 if scale else 4
    if len(blob) != off + S * A * width:
        raise TableFormatError(f"{path}: payload is {len(blob) - off} bytes, "
                               f"expected {S * A * width}")
    if A != 2:
        raise TableFormatError(f"{path}: expected 2 actions, found {A}")
    if expected_states is not None and S != expected_states:
        raise TableFormatError(f"{path}: {S} states, configuration expects {expected_states}")
    fingerprint = fp.hex() if fp.strip(b"\0") else ""
    frozen = bool(flags & 1)
    if scale:
        vals = np.frombuffer(blob, dtype="<i2", count=S * A, offset=off).reshape(S, A)
        table = QuantizedTable(scale, vals.astype(np.int16), episodes)
    else:
        vals = np.frombuffer(blob, dtype="<f4", count=S * A, offset=off).reshape(S, A)
        table = QTable(vals.astype(np.float32), episodes, "frozen" if frozen else "training")
    return TableFile(table, episodes, label, fingerprint, frozen)


def load_table(path, expected_states: int | None = None) -> QTable:
    """Load a table; quantized files come back dequantized and frozen."""
    tf = read_table_file(path, expected_states)
    if isinstance(tf.table, QuantizedTable):
        return dequantize(tf.table)
    return tf.table


def load_quantized(path) -> QuantizedTable:
    tf = read_table_file(path)
    if not isinstance(tf.table, QuantizedTable):
        raise TableFormatError(f"{path}: not a quantized table")
    return tf.table


def load_model(path, expected_states: int | None = None) -> TrainedModel:
    tf = read_table_file(path, expected_states)
    q = dequantize(tf.table) if isinstance(tf.table, QuantizedTable) else tf.table
    return TrainedModel(q, tf.episodes, tf.label, tf.fingerprint)


def model_from_agents(agents, cfg: AgentConfig, label: str = "") -> TrainedModel:
    """Collapse one run's per-node tables into a single model (episode-weighted)."""
    fp = cfg.fingerprint()
    parts = [TrainedModel(a.q, a.q.episodes_trained, label, fp)
             for a in agents if a.q.episodes_trained > 0]
    if not parts:
        warnings.warn("no agent completed an episode; model carries zero episodes")
        return TrainedModel(QTable.zeros(cfg.n_states), 0, label, fp)
    q = fedavg(parts)
    return TrainedModel(QTable(q.values, q.episodes_trained, "training"), q.episodes_trained,
                        label, fp)


def export_text(q: QTable, bins: BinConfig = BinConfig()) -> str:
    """One line per state: index, decoded components, both action values, greedy action."""
    lines = ["state,mean_bin,short_count,dmin_bin,near_count,q_skip,q_listen,greedy"]
    for s in range(q.n_states):
        mb, sc, db, nc = decode_state(s, bins)
        qs, ql = (float(v) for v in q.values[s])
        lines.append(f"{s},{mb},{sc},{db},{nc},{qs:.6g},{ql:.6g},"
                     f"{'skip' if qs > ql else 'listen'}")
    return "\n".join(lines) + "\n"
