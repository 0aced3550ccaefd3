"""Snapshot-to-snapshot attrition, stance mixing matrices and posting recency."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from triarch.errors import LabelClash, UndefinedMatrix
from triarch.graph import STANCE_ORDER, Snapshot, Stance


@dataclass(frozen=True)
class StanceAttrition:
    node_total: int
    node_removed: int
    edge_total: int
    edge_removed: int

    @property
    def node_pct(self) -> float:
        return _pct(self.node_removed, self.node_total)

    @property
    def edge_pct(self) -> float:
        return _pct(self.edge_removed, self.edge_total)


@dataclass(frozen=True)
class AttritionReport:
    per_stance: dict[Stance, StanceAttrition]
    node_total: int
    node_removed: int
    edge_total: int
    edge_removed: int
    attribution: str = "incident"

    @property
    def node_pct(self) -> float:
        return _pct(self.node_removed, self.node_total)

    @property
    def edge_pct(self) -> float:
        return _pct(self.edge_removed, self.edge_total)

    def rows(self):
        """Export rows: stance,node_total,node_removed,node_pct,edge_total,edge_removed,edge_pct."""
        for st in STANCE_ORDER:
            a = self.per_stance[st]
            yield (st.value, a.node_total, a.node_removed, f"{a.node_pct:.1f}",
                   a.edge_total, a.edge_removed, f"{a.edge_pct:.1f}")
        yield ("overall", self.node_total, self.node_removed, f"{self.node_pct:.1f}",
               self.edge_total, self.edge_removed, f"{self.edge_pct:.1f}")


REPORT_HEADER = ("stance", "node_total", "node_removed", "node_pct", "edge_total", "edge_removed", "edge_pct")


def _pct(removed, total):
    return 100.0 * removed / total if total else 0.0


def diff_attrition(before: Snapshot, after: Snapshot, attribution: str = "incident") -> AttritionReport:
    """Compare two snapshots by node id and ordered edge pair.

    With ``attribution="incident"`` an edge counts under the stance of each of
    its endpoints (once if both share a stance); ``"source"`` counts it only
    under the follower's stance.
    """
    if before.label == after.label:
        raise LabelClash(f"both snapshots are labeled {before.label!r}")
    if attribution not in ("incident", "source"):
        raise ValueError(f"unknown attribution {attribution!r}")
    after_ids = set(after.ids)
    after_edges = after.edge_set
    counts = {st: [0, 0, 0, 0] for st in STANCE_ORDER}
    for node in before.nodes:
        c = counts[node.stance]
        c[0] += 1
        if node.id not in after_ids:
            c[1] += 1
    stance_of = {n.id: n.stance for n in before.nodes}
    edge_removed = 0
    for e in before.edges:
        gone = e not in after_edges
        edge_removed += gone
        if attribution == "incident":
            stances = {stance_of[e.source], stance_of[e.target]}
        else:
            stances = {stance_of[e.source]}
        for st in stances:
            counts[st][2] += 1
            counts[st][3] += gone
    per = {st: StanceAttrition(c[0], c[1], c[2], c[3]) for st, c in counts.items()}
    return AttritionReport(
        per_stance=per,
        node_total=before.n,
        node_removed=sum(a.node_removed for a in per.values()),
        edge_total=len(before.edges),
        edge_removed=edge_removed,
        attribution=attribution,
    )


@dataclass(frozen=True)
class MixingMatrix:
    """Fractions of edges by (source stance, target stance), rows/cols in anti, pro, neutral order."""

    values: np.ndarray
    defined: bool
    edge_count: int = 0

    def __getitem__(self, key: tuple[Stance, Stance]) -> float:
        a, b = key
        return float(self.values[a.code, b.code])


def mixing_matrix(s: Snapshot) -> MixingMatrix:
    m = np.zeros((3, 3))
    if not s.edges:
        return MixingMatrix(m, defined=False)
    codes = s.stance_codes
    arr = s.edge_array
    np.add.at(m, (codes[arr[:, 0]], codes[arr[:, 1]]), 1.0)
    return MixingMatrix(m / len(s.edges), defined=True, edge_count=len(s.edges))


def matrix_distance(m1: MixingMatrix, m2: MixingMatrix) -> float:
    """L1 distance between two defined mixing matrices (range [0, 2])."""
    if not (m1.defined and m2.defined):
        raise UndefinedMatrix("mixing matrix of an edgeless graph has no distance")
    return float(np.abs(m1.values - m2.values).sum())


def _month_key(year: int, month: int) -> str:
    return f"{year:04d}-{month:02d}"


def month_range(start: str, end: str) -> list[str]:
    """Inclusive list of ``YYYY-MM`` keys."""
    y0, m0 = (int(x) for x in start.split("-"))
    y1, m1 = (int(x) for x in end.split("-"))
    if not (1 <= m0 <= 12 and 1 <= m1 <= 12) or (y1, m1) < (y0, m0):
        raise ValueError(f"bad month window {start}..{end}")
    out = []
    y, m = y0, m0
    while (y, m) <= (y1, m1):
        out.append(_month_key(y, m))
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)
    return out


@dataclass(frozen=True)
class ActivityHistogram:
    months: list[str]
    counts: dict[Stance, dict[str, int]] = field(default_factory=dict)

    def rows(self):
        for st in STANCE_ORDER:
            for month in self.months:
                yield st.value, month, self.counts[st][month]


def activity_histogram(posts, s: Snapshot, window: tuple[str, str], k: int = 10) -> ActivityHistogram:
    """Bucket each page's ``k`` most recent posts by calendar month within ``window``.

    Posts from pages absent in ``s`` are ignored. Timestamp ties keep file order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    months = month_range(*window)
    in_window = set(months)
    by_page = defaultdict(list)
    for order, p in enumerate(posts):
        if p.page_id in s.by_id:
            by_page[p.page_id].append((p.timestamp, -order))
    counts = {st: dict.fromkeys(months, 0) for st in STANCE_ORDER}
    for page_id, items in by_page.items():
        stance = s.by_id[page_id].stance
        items.sort(reverse=True)
        for ts, _ in items[:k]:
            key = _month_key(ts.year, ts.month)
            if key in in_window:
                counts[stance][key] += 1
    return ActivityHistogram(months, counts)
