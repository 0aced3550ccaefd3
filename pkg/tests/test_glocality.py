import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2_contingency

from conftest import page
from triarch.errors import DegenerateMarginal, EmptyMix, ValidationError
from triarch.glocality import (
    DISCOURSE_TOPICS,
    Gazetteer,
    Scale,
    TopicLexicon,
    TopicMix,
    build_scale_network,
    chi_square_independence,
    classify_posts,
    cross_topic_edge_fraction,
    extract_all,
    extract_toponyms,
    local_global_partition,
    topic_entropy,
    topic_mix,
)
from triarch.graph import Stance, build_snapshot

LEX = TopicLexicon.default()
GAZ = Gazetteer.default()


def test_default_lexicon_has_discourse_topics():
    assert set(DISCOURSE_TOPICS) <= set(LEX.topics)


def test_lexicon_must_cover_discourse_topics():
    with pytest.raises(ValidationError):
        TopicLexicon({"climate": ["climate"]})
    with pytest.raises(ValidationError):
        TopicLexicon({"x": []}, require_discourse=False)


@pytest.mark.parametrize(
    "text, topics",
    [
        ("Get your monkeypox vax'n today", {"mpox"}),
        ("hello world", set()),
        ("Climate change is on the ballot this election", {"climate", "elections"}),
        ("COVID-19 boosters and MPOX clinics", {"covid19", "mpox"}),
    ],
)
def test_classify(text, topics):
    assert classify_posts([text], LEX) == [frozenset(topics)]


def test_mix_even_split():
    mix = topic_mix(["climate crisis", "global warming", "the election", "go vote in the election"], LEX)
    assert mix.proportions == {"climate": 0.5, "elections": 0.5}
    assert mix.dominant_topic == "climate"


def test_mix_empty():
    mix = topic_mix(["nothing here"], LEX)
    assert mix.empty and mix.proportions == {}
    with pytest.raises(EmptyMix):
        topic_entropy(mix)


def test_mix_hand_count():
    posts = ["covid vaccine", "covid-19 update", "coronavirus news", "mpox outbreak"]
    mix = topic_mix(posts, LEX)
    assert mix.proportions == {"covid19": 0.75, "mpox": 0.25}
    assert mix.dominant_topic == "covid19" and mix.matched_posts == 4


@pytest.mark.parametrize(
    "props, bits",
    [({"a": 1.0}, 0.0), ({"a": 0.5, "b": 0.5}, 1.0), ({"a": 0.75, "b": 0.25}, 0.8113)],
)
def test_entropy(props, bits):
    assert topic_entropy(TopicMix(props, "a", 1)) == pytest.approx(bits, abs=5e-5)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["covid", "mpox", "abortion", "election", "climate", "cats", "climate election"]), max_size=30))
def test_mix_sums_to_one(texts):
    mix = topic_mix(texts, LEX)
    if not mix.empty:
        assert abs(sum(mix.proportions.values()) - 1.0) < 1e-12


@settings(max_examples=50, deadline=None)
@given(texts=st.lists(st.text(max_size=30), max_size=10), extra=st.sampled_from(["cat", "dog", r"\d+", "e"]))
def test_lexicon_monotone(texts, extra):
    grown = {k: v + ([extra] if k == "climate" else []) for k, v in LEX.topics.items()}
    before = classify_posts(texts, LEX)
    after = classify_posts(texts, TopicLexicon(grown))
    assert all(b <= a for b, a in zip(before, after))


def _topic_graph(dominants, edges):
    nodes = [page(k) for k in dominants]
    s = build_snapshot("t", nodes, edges)
    mixes = {k: TopicMix({t: 1.0}, t, 1) if t else TopicMix({}, None, 0) for k, t in dominants.items()}
    return s, mixes


def test_cross_fraction_same_topic():
    s, mixes = _topic_graph({"a": "climate", "b": "climate"}, [("a", "b"), ("b", "a")])
    assert cross_topic_edge_fraction(s, mixes).fraction == 0.0


def test_cross_fraction_bipartite():
    s, mixes = _topic_graph({"a": "climate", "b": "elections", "c": "climate"}, [("a", "b"), ("b", "c")])
    assert cross_topic_edge_fraction(s, mixes).fraction == 1.0


def test_cross_fraction_hand_fixture():
    dominants = {"a": "climate", "b": "climate", "c": "mpox", "d": "mpox", "e": None}
    edges = [("a", "b"), ("c", "d"), ("d", "c"), ("a", "c"), ("d", "b"), ("e", "a")]
    s, mixes = _topic_graph(dominants, edges)
    r = cross_topic_edge_fraction(s, mixes)
    assert (r.cross_edges, r.counted_edges, r.excluded_edges) == (2, 5, 1)
    assert r.fraction == 0.4


def test_nashville():
    recs = extract_toponyms(page("p", title="Nashville TN Parents"), GAZ)
    assert [(r.toponym, r.scale) for r in recs] == [("Nashville TN", Scale.CITY)]


def test_global_title():
    recs = extract_toponyms(page("p", title="Global Health Freedom"), GAZ)
    assert [(r.toponym, r.scale) for r in recs] == [("Global", Scale.GLOBAL)]


def test_no_toponym():
    assert extract_toponyms(page("p", title="Vaccine Facts Daily"), GAZ) == []


def test_longest_match_wins():
    gaz = Gazetteer({"York": "city", "New York": "state_province", "New York City": "city", "Kent": "metro_county"})
    recs = extract_toponyms(page("p", title="new  york city moms of kent", location_text="York"), gaz)
    assert [(r.toponym, r.scale, r.field) for r in recs] == [
        ("new  york city", Scale.CITY, "title"),
        ("kent", Scale.METRO_COUNTY, "title"),
        ("York", Scale.CITY, "location"),
    ]


def test_word_boundaries():
    gaz = Gazetteer({"Rome": "city"})
    assert extract_toponyms(page("p", title="Chromebooks for Romeo"), gaz) == []


def test_overlap_resolved_longest_then_leftmost():
    gaz = Gazetteer({"a b": "city", "b c": "country"})
    # equal length candidates overlap on "b": the leftmost is kept
    assert [r.toponym for r in extract_toponyms(page("p", title="a b c"), gaz)] == ["a b"]


def test_extraction_deterministic():
    node = page("p", title="Brooklyn and Europe and Canada", location_text="Brisbane")
    assert extract_toponyms(node, GAZ) == extract_toponyms(node, GAZ)


def _geo_graph(titles, edges):
    s = build_snapshot("geo", [page(k, title=t, fan_count=10) for k, t in titles.items()], edges)
    return s, extract_all(s, GAZ)


def test_scale_network_city_to_global():
    s, tops = _geo_graph({"n": "Nashville TN Parents", "g": "Global Health Freedom"}, [("n", "g")])
    net = build_scale_network(s, tops)
    assert [(e.scale_a, e.scale_b) for e in net.edges] == [(Scale.CITY, Scale.GLOBAL)]


def test_scale_network_exclusions():
    titles = {"n": "Nashville TN Parents", "b": "Brisbane Mums", "x": "Vaccine Talk"}
    s, tops = _geo_graph(titles, [("n", "b"), ("b", "x")])
    net = build_scale_network(s, tops)
    assert net.edges == () and net.excluded_same_scale == 1 and net.excluded_no_toponym == 1
    assert set(net.nodes) == {"n", "b"}


def test_scale_network_edges_bridge_families(reference_pair):
    before, _ = reference_pair
    net = build_scale_network(before, extract_all(before, GAZ))
    assert net.edges
    assert {(e.source, e.target) for e in net.edges} <= {(e.source, e.target) for e in before.edges}
    assert all(e.scale_a is not e.scale_b for e in net.edges)


def test_partition_examples():
    s, tops = _geo_graph({"a": "Global Moms", "b": "Global Truth"}, [])
    assert local_global_partition(tops, s).local == ()
    s, tops = _geo_graph({"a": "Brooklyn Moms"}, [])
    part = local_global_partition(tops, s)
    assert part.local == ("a",) and part.local_fans == 10


def test_partition_on_reference_pair(reference_pair):
    before, _ = reference_pair
    part = local_global_partition(extract_all(before, GAZ), before)
    assert (len(part.local), len(part.global_)) == (342, 1014)
    assert part.local_fans + part.global_fans == sum(n.fan_count for n in before.nodes)


def test_chi_square_independent_table():
    table = np.outer([1, 2, 3], [4, 5]) * 7
    assert chi_square_independence(table).statistic == pytest.approx(0.0, abs=1e-12)


def test_chi_square_two_by_two():
    r = chi_square_independence([[10, 20], [20, 10]])
    assert r.statistic == pytest.approx(20 / 3, abs=1e-9) and r.dof == 1
    stat, p, dof, _ = chi2_contingency([[10, 20], [20, 10]], correction=False)
    assert r.p_value == pytest.approx(p, rel=1e-12) and r.statistic == pytest.approx(stat)


def test_chi_square_dof():
    assert chi_square_independence(np.arange(1, 13).reshape(3, 4)).dof == 6


def test_chi_square_degenerate():
    with pytest.raises(DegenerateMarginal):
        chi_square_independence([[0, 0], [3, 4]])


@settings(max_examples=60, deadline=None)
@given(
    st.integers(2, 5).flatmap(lambda r: st.integers(2, 5).flatmap(
        lambda c: st.lists(st.lists(st.integers(1, 200), min_size=c, max_size=c), min_size=r, max_size=r))),
    st.integers(2, 9),
)
def test_chi_square_transpose_and_scale(table, k):
    t = np.array(table)
    base = chi_square_independence(t).statistic
    assert chi_square_independence(t.T).statistic == pytest.approx(base, rel=1e-9, abs=1e-9)
    assert chi_square_independence(k * t).statistic == pytest.approx(k * base, rel=1e-9, abs=1e-9)


def test_gazetteer_rejects_conflicts():
    with pytest.raises(ValidationError):
        Gazetteer({"Paris": "city", "paris": "country"})
    with pytest.raises(ValidationError):
        Gazetteer({"Atlantis": "planet"})


def test_default_gazetteer_covers_every_family():
    assert all(GAZ.names(sc) for sc in Scale)
    assert "Nashville TN" in GAZ.names(Scale.CITY)
    assert math.isfinite(GAZ.max_words) and GAZ.max_words >= 2
