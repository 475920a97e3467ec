"""Node placement, roles and the routing tree the simulator runs on."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

ROLES = ("sink", "relay", "leaf")


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class NodeSpec:
    id: int
    role: str
    position: tuple[float, float]
    parent_id: Optional[int] = None


@dataclass(frozen=True)
class Topology:
    nodes: tuple[NodeSpec, ...]
    d_max: float
    _by_id: dict = field(default_factory=dict, repr=False, compare=False)
    _children: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._by_id.update({n.id: n for n in self.nodes})
        for n in self.nodes:
            self._children.setdefault(n.id, [])
        for n in self.nodes:
            if n.parent_id is not None:
                self._children[n.parent_id].append(n.id)
        for kids in self._children.values():
            kids.sort()

    @property
    def ids(self) -> list[int]:
        return sorted(self._by_id)

    @property
    def sink(self) -> int:
        return next(n.id for n in self.nodes if n.role == "sink")

    @property
    def relays(self) -> list[int]:
        return sorted(n.id for n in self.nodes if n.role == "relay")

    @property
    def leaves(self) -> list[int]:
        return sorted(n.id for n in self.nodes if n.role == "leaf")

    def node(self, node_id: int) -> NodeSpec:
        return self._by_id[node_id]

    def parent(self, node_id: int) -> Optional[int]:
        return self._by_id[node_id].parent_id

    def children(self, node_id: int) -> list[int]:
        return list(self._children[node_id])

    def distance(self, a: int, b: int) -> float:
        (xa, ya), (xb, yb) = self._by_id[a].position, self._by_id[b].position
        return math.hypot(xa - xb, ya - yb)

    def path_to_sink(self, node_id: int) -> list[int]:
        path = [node_id]
        while self._by_id[path[-1]].parent_id is not None:
            path.append(self._by_id[path[-1]].parent_id)
        return path

    def hops(self, node_id: int) -> int:
        return len(self.path_to_sink(node_id)) - 1

    @property
    def depth(self) -> int:
        return max(self.hops(i) for i in self._by_id)

    def to_dict(self) -> dict:
        return {
            "d_max": self.d_max,
            "nodes": [
                {"id": n.id, "role": n.role, "position": list(n.position),
                 "parent": n.parent_id}
                for n in sorted(self.nodes, key=lambda n: n.id)
            ],
        }


def build_topology(spec: Iterable[NodeSpec], d_max: float) -> Topology:
    """Validate node specs and return a Topology.

    Raises TopologyError on duplicate ids, a sink count other than one,
    dangling or cyclic parent edges, and parent edges longer than ``d_max``.
    """
    nodes = tuple(spec)
    if not nodes:
        raise TopologyError("topology needs at least one node")
    if d_max <= 0:
        raise TopologyError(f"d_max must be positive, got {d_max}")

    by_id: dict[int, NodeSpec] = {}
    for n in nodes:
        if n.role not in ROLES:
            raise TopologyError(f"node {n.id}: unknown role {n.role!r}")
        if n.id in by_id:
            raise TopologyError(f"duplicate node id {n.id}")
        by_id[n.id] = n

    sinks = [n.id for n in nodes if n.role == "sink"]
    if len(sinks) != 1:
        raise TopologyError(f"expected exactly one sink, found {len(sinks)}: {sinks}")

    for n in nodes:
        if n.role == "sink":
            if n.parent_id is not None:
                raise TopologyError(f"sink {n.id} must not have a parent")
            continue
        if n.parent_id is None:
            raise TopologyError(f"node {n.id} ({n.role}) has no parent")
        if n.parent_id not in by_id:
            raise TopologyError(f"node {n.id}: parent {n.parent_id} does not exist")
        d = math.dist(n.position, by_id[n.parent_id].position)
        if d > d_max:
            raise TopologyError(
                f"edge {n.id}->{n.parent_id} spans {d:.2f} m, beyond d_max={d_max} m")

    # every node must reach the sink without revisiting a node
    for n in nodes:
        seen = {n.id}
        cur = n
        while cur.parent_id is not None:
            if cur.parent_id in seen:
                raise TopologyError(f"parent cycle through node {cur.parent_id}")
            seen.add(cur.parent_id)
            cur = by_id[cur.parent_id]

    return Topology(nodes=nodes, d_max=float(d_max))


def _polar(r: float, deg: float) -> tuple[float, float]:
    a = math.radians(deg)
    return (round(r * math.cos(a), 6), round(r * math.sin(a), 6))


def _simple5() -> Topology:
    nodes = [
        NodeSpec(1, "sink", (0.0, 0.0)),
        NodeSpec(2, "relay", (0.0, -20.0), 1),
        NodeSpec(3, "leaf", (-15.0, -40.0), 2),
        NodeSpec(4, "leaf", (0.0, -40.0), 2),
        NodeSpec(5, "leaf", (15.0, -40.0), 2),
    ]
    return build_topology(nodes, d_max=30.0)


# ring radii and angles follow the drawn layout; radii are synthetic (metres)
_STAR22_RELAYS = {2: (90, 1), 3: (210, 1), 4: (330, 1),
                  5: (70, 2), 6: (110, 2), 7: (190, 3), 8: (230, 3),
                  9: (310, 4), 10: (350, 4)}
_STAR22_LEAVES = {11: (62, 5), 12: (78, 5), 13: (102, 6), 14: (118, 6),
                  15: (182, 7), 16: (198, 7), 17: (222, 8), 18: (238, 8),
                  19: (302, 9), 20: (318, 9), 21: (342, 10), 22: (358, 10)}


def _star22() -> Topology:
    nodes = [NodeSpec(1, "sink", (0.0, 0.0))]
    for nid, (ang, parent) in _STAR22_RELAYS.items():
        r = 20.0 if nid <= 4 else 40.0
        nodes.append(NodeSpec(nid, "relay", _polar(r, ang), parent))
    for nid, (ang, parent) in _STAR22_LEAVES.items():
        nodes.append(NodeSpec(nid, "leaf", _polar(60.0, ang), parent))
    return build_topology(nodes, d_max=30.0)


def _link2() -> Topology:
    # one leaf, one hop; id 3 so the named traffic patterns give it a source
    return build_topology([NodeSpec(1, "sink", (0.0, 0.0)),
                           NodeSpec(3, "leaf", (0.0, -20.0), 1)], d_max=30.0)


BUILTINS = {"simple5": _simple5, "star22": _star22, "link2": _link2}


def builtin_topology(name: str) -> Topology:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise TopologyError(
            f"unknown builtin topology {name!r}; choose from {sorted(BUILTINS)}") from None


def topology_from_dict(doc: dict) -> Topology:
    nodes = [
        NodeSpec(int(n["id"]), n["role"], tuple(float(v) for v in n["position"]),
                 None if n.get("parent") is None else int(n["parent"]))
        for n in doc["nodes"]
    ]
    return build_topology(nodes, float(doc["d_max"]))
