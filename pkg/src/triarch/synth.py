"""Seeded tri-polar stochastic block model with page metadata.

Defaults reproduce the stance counts, audience totals and local/global split
of the 2019 baseline network; block probabilities are hand-tuned fixture
constants: dense anti-anti and anti-neutral blocks, and a pro block that
attaches to neutral pages but almost never to anti pages.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from triarch.errors import ValidationError
from triarch.glocality import Gazetteer, Scale
from triarch.graph import NEUTRAL_SUBCATEGORIES, STANCE_ORDER, FollowEdge, PageNode, Snapshot, Stance, build_snapshot

# rows: source stance, cols: target stance, both in anti, pro, neutral order
DEFAULT_BLOCK_PROBS = (
    (0.010, 0.0005, 0.005),
    (0.0005, 0.010, 0.006),
    (0.005, 0.006, 0.003),
)

# page counts per scale family for the 1,356-page baseline; 342 are local
BASELINE_SCALE_COUNTS = {
    "neighborhood": 40,
    "city": 160,
    "metro_county": 52,
    "state_province": 90,
    "country": 300,
    "multi_country_region": 80,
    "continent": 84,
    "global": 350,
    "none": 200,
}

TITLE_PHRASES = {
    Stance.ANTI: ["Vaccine Choice Network", "Parents for Medical Freedom", "Informed Consent Alliance",
                  "Vaccine Injury Awareness", "Natural Immunity Moms", "Health Freedom"],
    Stance.PRO: ["Vaccinates", "Immunization Coalition", "Families for Vaccines",
                 "Pediatric Health Advocates", "Science Moms", "Shot Clinic Volunteers"],
}
SUBCATEGORY_PHRASES = {
    "parenting": ["Parents Network", "Moms Group"],
    "alternative_health": ["Holistic Healing", "Natural Remedies Circle"],
    "gmo": ["Non-GMO Supporters", "Real Food Labels"],
    "social_movements": ["Grassroots Action", "Citizens Movement"],
    "environment": ["Green Living", "Clean Air Watch"],
    "news_media": ["Daily News", "Community Radio"],
    "politics": ["Liberty Caucus", "Voters Forum"],
    "religion": ["Faith Fellowship", "Prayer Circle"],
    "fitness_wellness": ["Yoga Collective", "Wellness Studio"],
    "food": ["Organic Kitchen", "Farmers Market"],
    "pets": ["Dog Lovers", "Cat Rescue"],
    "education": ["Homeschool Co-op", "Learning Hub"],
}


@dataclass(frozen=True)
class GeneratorConfig:
    anti: int = 501
    pro: int = 211
    neutral: int = 644
    block_probs: tuple = DEFAULT_BLOCK_PROBS
    subcategory_weights: dict = field(
        default_factory=lambda: {name: 1.0 / len(NEUTRAL_SUBCATEGORIES) for name in NEUTRAL_SUBCATEGORIES}
    )
    scale_weights: dict = field(
        default_factory=lambda: {k: v / 1356 for k, v in BASELINE_SCALE_COUNTS.items()}
    )
    fan_totals: tuple = (7_500_000, 13_000_000, 66_200_000)  # anti, pro, neutral
    fan_sigma: float = 1.5
    seed: int = 0
    label: str = "synthetic"

    def __post_init__(self):
        for name in ("anti", "pro", "neutral"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} count must be >= 0")
        probs = np.asarray(self.block_probs, dtype=float)
        if probs.shape != (3, 3) or not ((probs >= 0) & (probs <= 1)).all():
            raise ValidationError("block_probs must be a 3x3 matrix of probabilities")
        for name in ("subcategory_weights", "scale_weights"):
            w = getattr(self, name)
            if any(v < 0 for v in w.values()) or not math.isclose(sum(w.values()), 1.0, abs_tol=1e-9):
                raise ValidationError(f"{name} must be non-negative and sum to 1")
        unknown = set(self.subcategory_weights) - set(NEUTRAL_SUBCATEGORIES)
        if unknown:
            raise ValidationError(f"unknown subcategories {sorted(unknown)}")
        # canonical key order: apportioning depends on it, and configs may arrive key-sorted
        scale_order = [sc.label for sc in Scale] + ["none"]
        unknown = set(self.scale_weights) - set(scale_order)
        if unknown:
            raise ValidationError(f"unknown scale families {sorted(unknown)}")
        object.__setattr__(self, "scale_weights",
                           {k: self.scale_weights[k] for k in scale_order if k in self.scale_weights})
        object.__setattr__(self, "subcategory_weights",
                           {k: self.subcategory_weights[k] for k in NEUTRAL_SUBCATEGORIES if k in self.subcategory_weights})
        if len(self.fan_totals) != 3 or any(t < 0 for t in self.fan_totals):
            raise ValidationError("fan_totals must be three non-negative integers")

    @property
    def counts(self) -> tuple[int, int, int]:
        return self.anti, self.pro, self.neutral

    def to_dict(self) -> dict:
        d = asdict(self)
        d["block_probs"] = [list(r) for r in self.block_probs]
        d["fan_totals"] = list(self.fan_totals)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        data = dict(data)
        if "block_probs" in data:
            data["block_probs"] = tuple(tuple(float(x) for x in r) for r in data["block_probs"])
        if "fan_totals" in data:
            data["fan_totals"] = tuple(int(x) for x in data["fan_totals"])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown generator option(s): {', '.join(sorted(unknown))}")
        return cls(**data)


def apportion(weights: dict, total: int) -> dict:
    """Largest-remainder integer split of ``total`` by ``weights`` (ties by key order)."""
    keys = list(weights)
    raw = np.array([weights[k] for k in keys], dtype=float)
    raw = raw / raw.sum() * total if raw.sum() > 0 else raw
    base = np.floor(raw + 1e-9).astype(int)
    rem = raw - base
    short = total - int(base.sum())
    for i in sorted(range(len(keys)), key=lambda i: (-rem[i], i))[: max(short, 0)]:
        base[i] += 1
    return {k: int(b) for k, b in zip(keys, base)}


def _fan_counts(rng, n: int, total: int, sigma: float) -> list[int]:
    if n == 0:
        return []
    w = rng.lognormal(0.0, sigma, n)
    return list(apportion({i: x for i, x in enumerate(w)}, total).values())


def generate(config: GeneratorConfig = GeneratorConfig()) -> Snapshot:
    """Directed SBM draw over anti, pro and neutral blocks, with titles, subcategories and fans."""
    rng = np.random.default_rng(config.seed)
    counts = config.counts
    n = sum(counts)
    width = max(len(str(max(n - 1, 0))), 4)
    stances = [st for st, c in zip(STANCE_ORDER, counts) for _ in range(c)]
    ids = [f"p{i:0{width}d}" for i in range(n)]
    offsets = np.concatenate([[0], np.cumsum(counts)])

    subs = apportion(config.subcategory_weights, config.neutral)
    sub_list = [name for name, k in subs.items() for _ in range(k)]
    sub_list = [sub_list[i] for i in rng.permutation(len(sub_list))]

    scales = apportion(config.scale_weights, n)
    scale_list = [name for name, k in scales.items() for _ in range(k)]
    scale_list = [scale_list[i] for i in rng.permutation(len(scale_list))]

    gaz = Gazetteer.default()
    names = {sc: gaz.names(sc) for sc in Scale}

    fans = []
    for st, c, total in zip(STANCE_ORDER, counts, config.fan_totals):
        fans.extend(_fan_counts(rng, c, total, config.fan_sigma))

    nodes = []
    sub_iter = iter(sub_list)
    for i in range(n):
        st = stances[i]
        sub = next(sub_iter) if st is Stance.NEUTRAL else None
        phrases = SUBCATEGORY_PHRASES[sub] if sub else TITLE_PHRASES[st]
        phrase = phrases[int(rng.integers(len(phrases)))]
        scale_name = scale_list[i]
        location = None
        if scale_name == "none":
            title = phrase
        else:
            pool = names[Scale.parse(scale_name)]
            place = pool[int(rng.integers(len(pool)))]
            title = f"{place} {phrase}"
            if Scale.parse(scale_name) in (Scale.NEIGHBORHOOD, Scale.CITY):
                location = place
        nodes.append(PageNode(ids[i], st, sub, fans[i], title, location))

    probs = np.asarray(config.block_probs, dtype=float)
    edges = []
    for a in range(3):
        for b in range(3):
            na, nb = counts[a], counts[b]
            if na == 0 or nb == 0:
                continue
            hit = rng.random((na, nb)) < probs[a, b]
            if a == b:
                np.fill_diagonal(hit, False)
            src, dst = np.nonzero(hit)
            edges.extend(FollowEdge(ids[offsets[a] + u], ids[offsets[b] + v]) for u, v in zip(src, dst))
    return build_snapshot(config.label, nodes, edges)


def removal_count(fraction: float, total: int) -> int:
    """floor(fraction * total), guarded against float round-down (0.29 * 100 -> 29, not 28)."""
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError(f"removal fraction {fraction} outside [0, 1]")
    return min(total, math.floor(fraction * total + 1e-9))


def remove_counts(s: Snapshot, counts: dict[Stance, int], seed: int = 0, label: str | None = None) -> Snapshot:
    """Drop exactly ``counts[stance]`` uniformly chosen pages per stance, with their edges."""
    rng = np.random.default_rng(seed)
    drop = set()
    for st in STANCE_ORDER:
        members = [nd.id for nd in s.nodes if nd.stance is st]
        k = counts.get(st, 0)
        if not 0 <= k <= len(members):
            raise ValidationError(f"cannot remove {k} of {len(members)} {st.value} pages")
        if k:
            drop.update(members[i] for i in rng.choice(len(members), size=k, replace=False))
    nodes = [nd for nd in s.nodes if nd.id not in drop]
    edges = [e for e in s.edges if e.source not in drop and e.target not in drop]
    return Snapshot(label if label is not None else f"{s.label}+removal", tuple(nodes), tuple(edges))


def apply_removal(s: Snapshot, fractions: dict[Stance, float], seed: int = 0, label: str | None = None) -> Snapshot:
    """Remove floor(fraction * count) pages per stance; see :func:`removal_count`."""
    totals = {st: sum(1 for nd in s.nodes if nd.stance is st) for st in STANCE_ORDER}
    counts = {st: removal_count(fractions.get(st, 0.0), totals[st]) for st in STANCE_ORDER}
    return remove_counts(s, counts, seed, label)


REFERENCE_REMOVALS = {Stance.ANTI: 168, Stance.PRO: 37, Stance.NEUTRAL: 177}


def reference_pair(seed: int = 0) -> tuple[Snapshot, Snapshot]:
    """Baseline (2019-11) network and its 2025-06 survivor network with the reported per-stance removals."""
    before = generate(GeneratorConfig(seed=seed, label="2019-11"))
    after = remove_counts(before, REFERENCE_REMOVALS, seed=seed + 1, label="2025-06")
    return before, after
