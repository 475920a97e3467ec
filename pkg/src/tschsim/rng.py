"""Counter-based splitting of one master seed into independent streams.

Each stream is keyed by ``(repeat, node_id, purpose)`` through numpy's
SeedSequence spawn keys, so adding a node or a purpose never shifts the
draws another node sees.
"""

import random

import numpy as np

PURPOSES = {"traffic": 0, "loss": 1, "backoff": 2, "policy": 3, "phase": 4}


def derive_seed(master: int, *key: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in key))
    words = ss.generate_state(2, dtype=np.uint64)
    return int(words[0]) << 64 | int(words[1])


def stream(master: int, node_id: int, purpose: str, repeat: int = 0) -> random.Random:
    return random.Random(derive_seed(master, repeat, node_id, PURPOSES[purpose]))


def repeat_seed(master: int, repeat: int) -> int:
    """Seed for the ``repeat``-th run of a scenario (repeat 0 keeps ``master``)."""
    if repeat == 0:
        return int(master)
    return derive_seed(master, 1 << 20, repeat) & 0x7FFFFFFF
