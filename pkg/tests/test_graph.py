import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import page
from oracles import random_snapshot
from triarch.errors import DanglingEdge, DuplicateNodeId, SelfLoop, ValidationError
from triarch.graph import (
    Degree,
    FollowEdge,
    PageNode,
    Snapshot,
    Stance,
    build_snapshot,
    degree_stats,
    stance_counts,
)


def test_empty_snapshot():
    s = build_snapshot("empty", [], [])
    assert s.n == 0 and s.edges == ()


def test_duplicate_edges_collapse():
    s = build_snapshot("x", [page("a"), page("b")], [("a", "b"), ("a", "b")])
    assert s.edges == (FollowEdge("a", "b"),)


def test_dangling_edge_rejected():
    with pytest.raises(DanglingEdge) as info:
        build_snapshot("x", [page("a")], [("a", "b")])
    assert (info.value.source, info.value.target) == ("a", "b")


def test_self_loop_rejected():
    with pytest.raises(SelfLoop):
        build_snapshot("x", [page("a")], [("a", "a")])


def test_duplicate_node_rejected():
    with pytest.raises(DuplicateNodeId):
        build_snapshot("x", [page("a"), page("a", Stance.PRO)], [])


def test_reverse_pair_is_a_distinct_edge():
    s = build_snapshot("x", [page("a"), page("b")], [("a", "b"), ("b", "a")])
    assert len(s.edges) == 2


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(stance=Stance.ANTI, subcategory="parenting"),
        dict(stance=Stance.NEUTRAL, subcategory="astrology"),
        dict(stance=Stance.PRO, lat=10.0),
        dict(stance=Stance.PRO, lat=91.0, lon=0.0),
        dict(stance=Stance.PRO, lat=0.0, lon=-181.0),
        dict(stance=Stance.PRO, fan_count=-1),
    ],
)
def test_page_invariants(kwargs):
    with pytest.raises(ValidationError):
        PageNode("p", **kwargs)


def test_degree_single_edge():
    s = build_snapshot("x", [page("a"), page("b")], [("a", "b")])
    assert degree_stats(s) == {"a": Degree(0, 1, 1), "b": Degree(1, 0, 1)}


def test_degree_empty_graph():
    s = build_snapshot("x", [page("a"), page("b")], [])
    assert set(degree_stats(s).values()) == {Degree(0, 0, 0)}


def test_degree_triangle(triangle):
    # a->b->c->a: every node has one in and one out edge
    assert set(degree_stats(triangle).values()) == {Degree(1, 1, 2)}


def test_stance_counts_direct_sum():
    s = build_snapshot("x", [page("a", fan_count=3), page("b", fan_count=4)], [])
    counts = stance_counts(s)
    assert counts[Stance.ANTI] == (2, 7)
    assert counts[Stance.PRO] == (0, 0) and counts[Stance.NEUTRAL] == (0, 0)


def test_stance_counts_empty():
    assert set(stance_counts(build_snapshot("e", [], [])).values()) == {(0, 0)}


def test_stance_counts_baseline(reference_pair):
    before, _ = reference_pair
    counts = stance_counts(before)
    assert counts[Stance.PRO] == (211, 13_000_000)
    assert counts[Stance.ANTI] == (501, 7_500_000)
    assert counts[Stance.NEUTRAL] == (644, 66_200_000)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 15), p=st.floats(0, 0.6))
def test_partition_and_degree_sums(seed, n, p):
    s = random_snapshot(np.random.default_rng(seed), n, p)
    counts = stance_counts(s)
    assert sum(c for c, _ in counts.values()) == s.n
    deg = degree_stats(s).values()
    assert sum(d.in_degree for d in deg) == sum(d.out_degree for d in deg) == len(s.edges)
    assert all(d.total == d.in_degree + d.out_degree for d in deg)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 12))
def test_build_is_idempotent(seed, n):
    s = random_snapshot(np.random.default_rng(seed), n, 0.3)
    again = build_snapshot(s.label, s.nodes, s.edges)
    assert again == s


def test_snapshot_constructor_validates():
    with pytest.raises(DanglingEdge):
        Snapshot("x", (page("a"),), (FollowEdge("a", "zz"),))
