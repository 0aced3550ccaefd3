"""Topic and geographic glocality.

Topic side: keyword-lexicon classification of posts, per-page topic mixes,
mix entropy and the share of edges joining pages with different dominant
topics. Geographic side: longest-match toponym extraction against a
gazetteer of eight spatial-scale families, the cross-scale edge network,
the local/global page split, and a Pearson chi-square independence test.
"""

from __future__ import annotations

import enum
import math
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy import stats

from triarch.errors import DegenerateMarginal, EmptyMix, ValidationError
from triarch.graph import PageNode, Snapshot
from triarch.ingest import load_gazetteer_file, load_lexicon_file

DISCOURSE_TOPICS = ("covid19", "mpox", "abortion", "elections", "climate")


# -- topics -------------------------------------------------------------------


class TopicLexicon:
    """Topic name -> case-insensitive regular expressions."""

    def __init__(self, topics: dict[str, list[str]], require_discourse: bool = True):
        if require_discourse:
            missing = [t for t in DISCOURSE_TOPICS if t not in topics]
            if missing:
                raise ValidationError(f"lexicon lacks topic(s): {', '.join(missing)}")
        for name, patterns in topics.items():
            if not patterns:
                raise ValidationError(f"topic {name!r} has no patterns")
        self.topics = {name: list(p) for name, p in topics.items()}
        self._compiled = {}
        for name, patterns in self.topics.items():
            try:
                self._compiled[name] = [re.compile(p, re.IGNORECASE) for p in patterns]
            except re.error as exc:
                raise ValidationError(f"topic {name!r}: bad pattern ({exc})") from None

    @classmethod
    def from_file(cls, path, require_discourse: bool = True) -> "TopicLexicon":
        return cls(load_lexicon_file(path), require_discourse)

    @classmethod
    def default(cls) -> "TopicLexicon":
        with resources.as_file(resources.files("triarch") / "data" / "topics.lex") as path:
            return cls.from_file(path)

    def match(self, text: str) -> frozenset[str]:
        return frozenset(name for name, pats in self._compiled.items() if any(p.search(text) for p in pats))


def classify_posts(posts, lexicon: TopicLexicon) -> list[frozenset[str]]:
    """Matched topic set per post, in input order. Accepts post records or plain strings."""
    return [lexicon.match(p if isinstance(p, str) else p.text) for p in posts]


@dataclass(frozen=True)
class TopicMix:
    proportions: dict[str, float]
    dominant_topic: str | None
    matched_posts: int = 0

    @property
    def empty(self) -> bool:
        return self.dominant_topic is None


def topic_mix(page_posts, lexicon: TopicLexicon) -> TopicMix:
    """Topic shares over matched post-topic incidences; ties for dominant go to the smallest name."""
    matches = classify_posts(page_posts, lexicon)
    tally = Counter(t for m in matches for t in m)
    total = sum(tally.values())
    if total == 0:
        return TopicMix({}, None, 0)
    props = {t: tally[t] / total for t in sorted(tally)}
    dominant = min(tally, key=lambda t: (-tally[t], t))
    return TopicMix(props, dominant, sum(1 for m in matches if m))


def topic_entropy(mix: TopicMix) -> float:
    """Shannon entropy of the mix in bits."""
    if mix.empty:
        raise EmptyMix("entropy of an empty topic mix")
    return float(-sum(p * math.log2(p) for p in mix.proportions.values() if p > 0)) + 0.0


def page_topic_mixes(posts, s: Snapshot, lexicon: TopicLexicon) -> dict[str, TopicMix]:
    by_page: dict[str, list] = {nid: [] for nid in s.ids}
    for p in posts:
        if p.page_id in by_page:
            by_page[p.page_id].append(p)
    return {nid: topic_mix(items, lexicon) for nid, items in by_page.items()}


@dataclass(frozen=True)
class CrossTopicResult:
    fraction: float
    cross_edges: int
    counted_edges: int
    excluded_edges: int


def cross_topic_edge_fraction(s: Snapshot, mixes: dict[str, TopicMix]) -> CrossTopicResult:
    """Share of edges whose endpoints have different dominant topics.

    Edges touching a page with an empty (or missing) mix are excluded and
    counted separately; with no countable edges the fraction is 0.
    """
    cross = counted = excluded = 0
    for e in s.edges:
        a, b = mixes.get(e.source), mixes.get(e.target)
        if a is None or b is None or a.empty or b.empty:
            excluded += 1
            continue
        counted += 1
        cross += a.dominant_topic != b.dominant_topic
    return CrossTopicResult(cross / counted if counted else 0.0, cross, counted, excluded)


# -- places -------------------------------------------------------------------


class Scale(enum.IntEnum):
    """Spatial-scale families, finest to coarsest."""

    NEIGHBORHOOD = 0
    CITY = 1
    METRO_COUNTY = 2
    STATE_PROVINCE = 3
    COUNTRY = 4
    MULTI_COUNTRY_REGION = 5
    CONTINENT = 6
    GLOBAL = 7

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "Scale":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValidationError(f"unknown scale family {text!r}") from None


LOCAL_SCALES = frozenset({Scale.NEIGHBORHOOD, Scale.CITY, Scale.METRO_COUNTY, Scale.STATE_PROVINCE})


@dataclass(frozen=True)
class ToponymRecord:
    toponym: str
    scale: Scale
    field: str = "title"


def _norm(text: str) -> str:
    return " ".join(text.split()).casefold()


_WORD = re.compile(r"\w+(?:['’.-]\w+)*")


class Gazetteer:
    def __init__(self, entries: dict[str, Scale | str]):
        self.entries: dict[str, Scale] = {}
        self.display: dict[str, str] = {}
        for name, scale in entries.items():
            key = _norm(name)
            if not key:
                raise ValidationError("empty toponym")
            sc = scale if isinstance(scale, Scale) else Scale.parse(scale)
            if key in self.entries and self.entries[key] is not sc:
                raise ValidationError(f"toponym {name!r} listed under two scales")
            self.entries[key] = sc
            self.display.setdefault(key, " ".join(name.split()))
        self.max_words = max((len(_WORD.findall(k)) for k in self.entries), default=0)

    @classmethod
    def from_file(cls, path) -> "Gazetteer":
        return cls(load_gazetteer_file(path))

    @classmethod
    def default(cls) -> "Gazetteer":
        with resources.as_file(resources.files("triarch") / "data" / "gazetteer.csv") as path:
            return cls.from_file(path)

    def names(self, scale: Scale) -> list[str]:
        """Entries of one family as written in the source, sorted."""
        return sorted(self.display[k] for k, v in self.entries.items() if v is scale)

    def scan(self, text: str) -> list[tuple[int, int, Scale]]:
        """Non-overlapping (start, end, scale) matches on word boundaries.

        All candidate spans are collected, then accepted greedily longest
        first, ties broken leftmost. Result is in text order.
        """
        if not text or not self.entries:
            return []
        words = [(m.start(), m.end()) for m in _WORD.finditer(text)]
        candidates = []
        for i, (start, _) in enumerate(words):
            for j in range(i, min(i + self.max_words, len(words))):
                end = words[j][1]
                scale = self.entries.get(_norm(text[start:end]))
                if scale is not None:
                    candidates.append((start, end, scale))
        candidates.sort(key=lambda c: (-(c[1] - c[0]), c[0]))
        taken: list[tuple[int, int, Scale]] = []
        for c in candidates:
            if all(c[1] <= t[0] or c[0] >= t[1] for t in taken):
                taken.append(c)
        return sorted(taken)


def extract_toponyms(node: PageNode, gazetteer: Gazetteer) -> list[ToponymRecord]:
    out = []
    for field, text in (("title", node.title), ("location", node.location_text or "")):
        for start, end, scale in gazetteer.scan(text):
            out.append(ToponymRecord(text[start:end], scale, field))
    return out


def extract_all(s: Snapshot, gazetteer: Gazetteer) -> dict[str, list[ToponymRecord]]:
    return {node.id: extract_toponyms(node, gazetteer) for node in s.nodes}


def coarsest(records) -> Scale | None:
    return max((r.scale for r in records), default=None)


@dataclass(frozen=True)
class ScaleEdge:
    source: str
    target: str
    scale_a: Scale
    scale_b: Scale


@dataclass(frozen=True)
class ScaleNetwork:
    nodes: tuple[str, ...]
    edges: tuple[ScaleEdge, ...]
    excluded_no_toponym: int
    excluded_same_scale: int

    def rows(self):
        for e in self.edges:
            yield e.source, e.target, e.scale_a.label, e.scale_b.label


def build_scale_network(s: Snapshot, toponyms: dict[str, list[ToponymRecord]]) -> ScaleNetwork:
    """Follow edges joining pages whose coarsest scale families differ.

    Each edge is annotated (source family, target family). Edges with an
    endpoint lacking toponyms, or whose endpoints share a coarsest family,
    are counted but left out.
    """
    top = {nid: coarsest(toponyms.get(nid, ())) for nid in s.ids}
    edges = []
    no_top = same = 0
    for e in s.edges:
        a, b = top[e.source], top[e.target]
        if a is None or b is None:
            no_top += 1
        elif a is b:
            same += 1
        else:
            edges.append(ScaleEdge(e.source, e.target, a, b))
    nodes = tuple(nid for nid in s.ids if top[nid] is not None)
    return ScaleNetwork(nodes, tuple(edges), no_top, same)


@dataclass(frozen=True)
class LocalGlobalPartition:
    local: tuple[str, ...]
    global_: tuple[str, ...]
    no_toponym: tuple[str, ...]
    local_fans: int
    global_fans: int


def local_global_partition(toponyms: dict[str, list[ToponymRecord]], s: Snapshot) -> LocalGlobalPartition:
    """Local iff the page's coarsest family is state/province or finer.

    Pages without toponyms fall in the global side and are also listed in
    ``no_toponym``.
    """
    local, glob, none = [], [], []
    for node in s.nodes:
        sc = coarsest(toponyms.get(node.id, ()))
        if sc is None:
            none.append(node.id)
            glob.append(node.id)
        elif sc in LOCAL_SCALES:
            local.append(node.id)
        else:
            glob.append(node.id)
    fans = {n.id: n.fan_count for n in s.nodes}
    return LocalGlobalPartition(
        tuple(local), tuple(glob), tuple(none),
        sum(fans[i] for i in local), sum(fans[i] for i in glob),
    )


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float


def chi_square_independence(table) -> ChiSquareResult:
    """Pearson chi-square test of independence for an r x c count table (no continuity correction)."""
    obs = np.asarray(table, dtype=float)
    if obs.ndim != 2 or obs.size == 0:
        raise ValidationError("table must be a non-empty 2-D array")
    if (obs < 0).any() or not np.isfinite(obs).all():
        raise ValidationError("counts must be finite and non-negative")
    rows, cols = obs.sum(axis=1), obs.sum(axis=0)
    if (rows <= 0).any() or (cols <= 0).any():
        raise DegenerateMarginal("every row and column sum must be positive")
    expected = np.outer(rows, cols) / obs.sum()
    statistic = float(((obs - expected) ** 2 / expected).sum())
    dof = (obs.shape[0] - 1) * (obs.shape[1] - 1)
    p = float(stats.chi2.sf(statistic, dof)) if dof > 0 else 1.0
    return ChiSquareResult(statistic, dof, p)
