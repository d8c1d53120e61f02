"""vRAN network graph: generation, serialization, shortest paths and routes."""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .ran import SplitId

TOPOLOGY_FORMAT_VERSION = 1


class Role(str, Enum):
    EPC = "EPC"
    ES = "ES"
    FS = "FS"
    RU = "RU"
    ROUTER = "ROUTER"


class NoPathError(RuntimeError):
    pass


@dataclass(frozen=True)
class Node:
    id: int
    role: Role
    position: tuple[float, float]
    compute_capacity: float | None = None


@dataclass(frozen=True)
class Link:
    endpoints: tuple[int, int]
    latency_ms: float
    capacity_gbps: float
    weight: float
    length_km: float

    def __post_init__(self):
        if self.latency_ms < 0 or self.weight < 0 or self.length_km < 0:
            raise ValueError(f"negative link attribute on {self.endpoints}")
        if self.capacity_gbps <= 0:
            raise ValueError(f"link {self.endpoints} capacity must be positive")


@dataclass(frozen=True)
class PathInfo:
    nodes: tuple[int, ...]
    weight: float
    delay_ms: float
    length_km: float

    @property
    def links(self) -> list[tuple[int, int]]:
        return list(zip(self.nodes[:-1], self.nodes[1:]))


@dataclass(frozen=True)
class RoutePlan:
    """Segments of one BS flow; absent segments are None.

    p_0m: EPC -> ES, p_ml: ES -> FS, p_lk: FS -> RU, p_mk: ES -> RU (S4 only).
    """
    bs_id: int
    p_0m: PathInfo
    p_ml: PathInfo | None = None
    p_lk: PathInfo | None = None
    p_mk: PathInfo | None = None

    def segments(self) -> dict[str, PathInfo]:
        return {k: v for k, v in (("p_0m", self.p_0m), ("p_ml", self.p_ml),
                                  ("p_lk", self.p_lk), ("p_mk", self.p_mk)) if v is not None}


@dataclass
class Topology:
    nodes: list[Node]
    links: list[Link]
    epc_id: int
    es_ids: list[int]
    fs_ids: list[int]
    ru_ids: list[int]
    _adj: dict[int, list[tuple[int, Link]]] = field(default=None, init=False, repr=False, compare=False)
    _path_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids")
        by_id = {n.id: n for n in self.nodes}
        groups = {Role.EPC: [self.epc_id], Role.ES: self.es_ids, Role.FS: self.fs_ids, Role.RU: self.ru_ids}
        seen: set[int] = set()
        for role, members in groups.items():
            for i in members:
                if i not in by_id:
                    raise ValueError(f"{role.value} id {i} is not a node")
                if i in seen:
                    raise ValueError(f"node {i} assigned to more than one role")
                if by_id[i].role is not role:
                    raise ValueError(f"node {i} has role {by_id[i].role.value}, expected {role.value}")
                seen.add(i)
        for n in self.nodes:
            if n.compute_capacity is not None and n.compute_capacity < 0:
                raise ValueError(f"node {n.id} has negative capacity")
        self._adj = {i: [] for i in ids}
        for link in self.links:
            u, v = link.endpoints
            if u not in by_id or v not in by_id:
                raise ValueError(f"link {link.endpoints} references unknown node")
            self._adj[u].append((v, link))
            self._adj[v].append((u, link))
        self._by_id = by_id
        reach = self._component(self.epc_id)
        missing = [k for k in self.ru_ids if k not in reach]
        if missing:
            raise ValueError(f"RUs {missing} not reachable from EPC")

    def node(self, node_id: int) -> Node:
        return self._by_id[node_id]

    def neighbors(self, node_id: int) -> list[tuple[int, Link]]:
        return self._adj[node_id]

    def degree(self, node_id: int) -> int:
        return len(self._adj[node_id])

    @property
    def fs_capacity(self) -> np.ndarray:
        return np.array([self._by_id[i].compute_capacity or 0.0 for i in self.fs_ids])

    @property
    def es_capacity(self) -> np.ndarray:
        return np.array([self._by_id[i].compute_capacity or 0.0 for i in self.es_ids])

    def link(self, u: int, v: int) -> Link:
        for w, link in self._adj[u]:
            if w == v:
                return link
        raise KeyError((u, v))

    def _component(self, start: int) -> set[int]:
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v, _ in self._adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "version": TOPOLOGY_FORMAT_VERSION,
            "epc_id": self.epc_id,
            "es_ids": list(self.es_ids),
            "fs_ids": list(self.fs_ids),
            "ru_ids": list(self.ru_ids),
            "nodes": [{"id": n.id, "role": n.role.value, "x_km": n.position[0], "y_km": n.position[1],
                       "capacity_rc": n.compute_capacity} for n in self.nodes],
            "links": [{"u": l.endpoints[0], "v": l.endpoints[1], "latency_ms": l.latency_ms,
                       "capacity_gbps": l.capacity_gbps, "weight": l.weight, "length_km": l.length_km}
                      for l in self.links],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Topology":
        version = data.get("version")
        if version != TOPOLOGY_FORMAT_VERSION:
            raise ValueError(f"unsupported topology file version {version!r}")
        nodes = [Node(int(n["id"]), Role(n["role"]), (float(n["x_km"]), float(n["y_km"])),
                      None if n.get("capacity_rc") is None else float(n["capacity_rc"]))
                 for n in data["nodes"]]
        links = [Link((int(l["u"]), int(l["v"])), float(l["latency_ms"]), float(l["capacity_gbps"]),
                      float(l["weight"]), float(l["length_km"])) for l in data["links"]]
        return cls(nodes, links, int(data["epc_id"]), [int(i) for i in data["es_ids"]],
                   [int(i) for i in data["fs_ids"]], [int(i) for i in data["ru_ids"]])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "Topology":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate_waxman(n_nodes: int, alpha: float = 0.5, beta: float = 0.1, seed: int = 0,
                    role_counts: tuple[int, int, int] = (4, 8, 8), area_km: float = 10.0,
                    fs_capacity_rc: float = 20.0, es_capacity_rc: float = 100.0,
                    latency_ms_range=(0.0, 0.1), capacity_gbps_range=(30.0, 160.0),
                    weight_range=(0.0, 0.1), max_repair_rounds: int = 1000) -> Topology:
    """Waxman random graph with roles assigned by descending degree.

    Edge (u, v) appears with probability alpha * exp(-d(u, v) / (beta * D_max)).
    Disconnected components are joined by their closest node pair.
    """
    n_es, n_fs, n_ru = role_counts
    if min(role_counts) < 0:
        raise ValueError("role counts must be non-negative")
    if n_nodes < 1 + n_es + n_fs + n_ru:
        raise ValueError(f"{n_nodes} nodes cannot host 1 EPC + {n_es} ES + {n_fs} FS + {n_ru} RU")
    if not (0 < alpha <= 1 and 0 < beta <= 1):
        raise ValueError("alpha and beta must lie in (0, 1]")

    rng = np.random.default_rng(seed)
    pos = rng.uniform(0.0, area_km, size=(n_nodes, 2))
    dist = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
    d_max = dist.max() if n_nodes > 1 else 1.0
    d_max = d_max if d_max > 0 else 1.0

    iu, ju = np.triu_indices(n_nodes, k=1)
    prob = alpha * np.exp(-dist[iu, ju] / (beta * d_max))
    keep = rng.random(iu.size) < prob
    edges = [(int(u), int(v)) for u, v in zip(iu[keep], ju[keep])]

    parent = list(range(n_nodes))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in edges:
        parent[find(u)] = find(v)

    for _ in range(max_repair_rounds):
        roots = {find(i) for i in range(n_nodes)}
        if len(roots) <= 1:
            break
        comp = np.array([find(i) for i in range(n_nodes)])
        cross = comp[:, None] != comp[None, :]
        masked = np.where(cross, dist, np.inf)
        u, v = np.unravel_index(int(np.argmin(masked)), masked.shape)
        u, v = (int(u), int(v)) if u < v else (int(v), int(u))
        edges.append((u, v))
        parent[find(u)] = find(v)
    else:
        raise RuntimeError("could not connect Waxman graph")

    links = []
    for u, v in edges:
        links.append(Link((u, v), float(rng.uniform(*latency_ms_range)),
                          float(rng.uniform(*capacity_gbps_range)),
                          float(rng.uniform(*weight_range)), float(dist[u, v])))

    degree = np.zeros(n_nodes, dtype=int)
    for u, v in edges:
        degree[u] += 1
        degree[v] += 1
    order = sorted(range(n_nodes), key=lambda i: (-degree[i], i))
    epc = order[0]
    es = order[1:1 + n_es]
    fs = order[1 + n_es:1 + n_es + n_fs]
    ru = order[1 + n_es + n_fs:1 + n_es + n_fs + n_ru]
    role = {epc: Role.EPC, **{i: Role.ES for i in es}, **{i: Role.FS for i in fs}, **{i: Role.RU for i in ru}}
    cap = {**{i: es_capacity_rc for i in es}, **{i: fs_capacity_rc for i in fs}}
    nodes = [Node(i, role.get(i, Role.ROUTER), (float(pos[i, 0]), float(pos[i, 1])), cap.get(i))
             for i in range(n_nodes)]
    return Topology(nodes, links, epc, list(es), list(fs), list(ru))


def shortest_path(topo: Topology, src: int, dst: int) -> PathInfo:
    """Minimum total-weight path; ties go to the lexicographically smallest node sequence."""
    key = (src, dst)
    cached = topo._path_cache.get(key)
    if cached is not None:
        return cached
    if src not in topo._adj or dst not in topo._adj:
        raise NoPathError(f"unknown node in query {src}->{dst}")
    best: dict[int, tuple[float, tuple[int, ...]]] = {}
    heap = [(0.0, (src,))]
    while heap:
        w, path = heapq.heappop(heap)
        u = path[-1]
        if u in best:
            continue
        best[u] = (w, path)
        if u == dst:
            break
        for v, link in topo.neighbors(u):
            if v not in best:
                heapq.heappush(heap, (w + link.weight, path + (v,)))
    if dst not in best:
        raise NoPathError(f"no path from {src} to {dst}")
    w, path = best[dst]
    delay = 0.0
    length = 0.0
    for u, v in zip(path[:-1], path[1:]):
        link = topo.link(u, v)
        delay += link.latency_ms
        length += link.length_km
    info = PathInfo(path, w, delay, length)
    topo._path_cache[key] = info
    return info


def route_for(topo: Topology, bs: int, split, fs: int | None, es: int) -> RoutePlan:
    """Compose EPC->ES->FS->RU (S1-S3) or EPC->ES->RU (S4) from shortest segments."""
    split = SplitId(split)
    if split.uses_fs and fs is None:
        raise ValueError(f"split {split.name} needs a far-edge server")
    if not split.uses_fs and fs is not None:
        raise ValueError("S4 does not use a far-edge server")
    p_0m = shortest_path(topo, topo.epc_id, es)
    if split.uses_fs:
        return RoutePlan(bs, p_0m, p_ml=shortest_path(topo, es, fs), p_lk=shortest_path(topo, fs, bs))
    return RoutePlan(bs, p_0m, p_mk=shortest_path(topo, es, bs))
