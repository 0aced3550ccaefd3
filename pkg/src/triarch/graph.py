"""Directed page-network model: stance-labeled pages joined by follow edges."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np

from triarch.errors import DanglingEdge, DuplicateNodeId, SelfLoop, ValidationError


class Stance(enum.Enum):
    ANTI = "anti"
    PRO = "pro"
    NEUTRAL = "neutral"

    @classmethod
    def parse(cls, text: str) -> "Stance":
        return cls(text.strip().lower())

    @property
    def code(self) -> int:
        return STANCE_ORDER.index(self)

    def __str__(self):
        return self.value


STANCE_ORDER = (Stance.ANTI, Stance.PRO, Stance.NEUTRAL)

# Neutral pages carry one of these topic areas.
NEUTRAL_SUBCATEGORIES = (
    "parenting",
    "alternative_health",
    "gmo",
    "social_movements",
    "environment",
    "news_media",
    "politics",
    "religion",
    "fitness_wellness",
    "food",
    "pets",
    "education",
)


@dataclass(frozen=True)
class PageNode:
    id: str
    stance: Stance
    subcategory: str | None = None
    fan_count: int = 0
    title: str = ""
    location_text: str | None = None
    lat: float | None = None
    lon: float | None = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("node id must be non-empty")
        if not isinstance(self.stance, Stance):
            raise ValidationError(f"{self.id}: stance must be a Stance, got {self.stance!r}")
        if self.subcategory is not None:
            if self.stance is not Stance.NEUTRAL:
                raise ValidationError(f"{self.id}: only neutral pages carry a subcategory")
            if self.subcategory not in NEUTRAL_SUBCATEGORIES:
                raise ValidationError(f"{self.id}: unknown subcategory {self.subcategory!r}")
        if isinstance(self.fan_count, bool) or not isinstance(self.fan_count, int) or self.fan_count < 0:
            raise ValidationError(f"{self.id}: fan_count must be a non-negative integer")
        if (self.lat is None) != (self.lon is None):
            raise ValidationError(f"{self.id}: lat and lon must be given together")
        if self.lat is not None:
            if not (math.isfinite(self.lat) and -90.0 <= self.lat <= 90.0):
                raise ValidationError(f"{self.id}: lat out of range")
            if not (math.isfinite(self.lon) and -180.0 <= self.lon <= 180.0):
                raise ValidationError(f"{self.id}: lon out of range")


class FollowEdge(NamedTuple):
    """``source`` follows ``target``."""

    source: str
    target: str


class Degree(NamedTuple):
    in_degree: int
    out_degree: int
    total: int


@dataclass(frozen=True, eq=True)
class Snapshot:
    """Immutable labeled network. Nodes are sorted by id and edges by (source, target)."""

    label: str
    nodes: tuple[PageNode, ...]
    edges: tuple[FollowEdge, ...]

    def __post_init__(self):
        seen = set()
        for node in self.nodes:
            if node.id in seen:
                raise DuplicateNodeId(f"duplicate node id {node.id!r}")
            seen.add(node.id)
        pairs = set()
        for e in self.edges:
            if e.source == e.target:
                raise SelfLoop(e.source)
            if e.source not in seen or e.target not in seen:
                raise DanglingEdge(e.source, e.target)
            if e in pairs:
                raise ValidationError(f"duplicate edge {e.source!r}->{e.target!r}")
            pairs.add(e)

    def __hash__(self):
        return hash((self.label, self.nodes, self.edges))

    @property
    def n(self) -> int:
        return len(self.nodes)

    @cached_property
    def ids(self) -> list[str]:
        return [node.id for node in self.nodes]

    @cached_property
    def index(self) -> dict[str, int]:
        return {node.id: i for i, node in enumerate(self.nodes)}

    @cached_property
    def by_id(self) -> dict[str, PageNode]:
        return {node.id: node for node in self.nodes}

    @cached_property
    def edge_set(self) -> frozenset[FollowEdge]:
        return frozenset(self.edges)

    @cached_property
    def edge_array(self) -> np.ndarray:
        """(m, 2) int array of node indices."""
        idx = self.index
        arr = np.array([(idx[e.source], idx[e.target]) for e in self.edges], dtype=np.int64)
        return arr.reshape(-1, 2)

    @cached_property
    def stance_codes(self) -> np.ndarray:
        return np.array([node.stance.code for node in self.nodes], dtype=np.int8)

    def undirected_neighbors(self) -> list[list[int]]:
        """Sorted neighbor index lists ignoring edge direction (no self)."""
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edge_array:
            nbrs[u].add(int(v))
            nbrs[v].add(int(u))
        return [sorted(s) for s in nbrs]

    @cached_property
    def undirected_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) of the undirected neighbor lists, excluding self."""
        nbrs = self.undirected_neighbors()
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(x) for x in nbrs])
        indices = np.array([v for x in nbrs for v in x], dtype=np.int64)
        return indptr, indices

    def with_stances(self, stances: dict[str, Stance], label: str | None = None) -> "Snapshot":
        """Copy with some node stances replaced. Subcategories are dropped for non-neutral results."""
        nodes = []
        for node in self.nodes:
            new = stances.get(node.id, node.stance)
            if new is node.stance:
                nodes.append(node)
                continue
            sub = node.subcategory if new is Stance.NEUTRAL else None
            nodes.append(
                PageNode(node.id, new, sub, node.fan_count, node.title, node.location_text, node.lat, node.lon)
            )
        return Snapshot(self.label if label is None else label, tuple(nodes), self.edges)


def build_snapshot(label: str, nodes: Iterable[PageNode], edges: Iterable[FollowEdge | tuple[str, str]]) -> Snapshot:
    """Validate and canonicalize a snapshot.

    Duplicate edges collapse to one; self-loops, dangling endpoints and
    repeated node ids raise.
    """
    nodes = list(nodes)
    ids = set()
    for node in nodes:
        if node.id in ids:
            raise DuplicateNodeId(f"duplicate node id {node.id!r}")
        ids.add(node.id)
    unique = set()
    for e in edges:
        e = FollowEdge(*e)
        if e.source == e.target:
            raise SelfLoop(e.source)
        if e.source not in ids or e.target not in ids:
            raise DanglingEdge(e.source, e.target)
        unique.add(e)
    return Snapshot(label, tuple(sorted(nodes, key=lambda nd: nd.id)), tuple(sorted(unique)))


def degree_stats(s: Snapshot) -> dict[str, Degree]:
    n = s.n
    indeg = np.zeros(n, dtype=np.int64)
    outdeg = np.zeros(n, dtype=np.int64)
    if s.edges:
        arr = s.edge_array
        np.add.at(outdeg, arr[:, 0], 1)
        np.add.at(indeg, arr[:, 1], 1)
    return {
        nid: Degree(int(indeg[i]), int(outdeg[i]), int(indeg[i] + outdeg[i]))
        for i, nid in enumerate(s.ids)
    }


def stance_counts(s: Snapshot) -> dict[Stance, tuple[int, int]]:
    """Stance -> (node count, summed fan_count)."""
    out = {st: [0, 0] for st in STANCE_ORDER}
    for node in s.nodes:
        out[node.stance][0] += 1
        out[node.stance][1] += node.fan_count
    return {st: (c, f) for st, (c, f) in out.items()}
