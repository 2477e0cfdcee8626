import numpy as np
import pytest

from fractions import Fraction

from matching_sparsifier.graph import WeightedGraph
from matching_sparsifier.hypergraph import build_H, greedy_hypergraph_matching
from matching_sparsifier.misc import InvalidWalk
from matching_sparsifier.walks import (
    MultiWalk,
    Profile,
    ProfileEntry,
    apply_walk,
    apply_walks,
    gain,
    is_alternating,
    is_applicable,
    is_multiwalk,
    walk_degrees,
    walk_vertices,
)


def path_profile(weights, matched, alpha=1):
    """
    A path 0-1-…-k with edge i of weight weights[i]; every entry holds all
    edges and the matching `matched`.
    """
    g = WeightedGraph(
        len(weights) + 1, [(i, i + 1, Fraction(w)) for i, w in enumerate(weights)]
    )
    entries = [ProfileEntry(range(g.m), matched) for _ in range(alpha)]
    return Profile(g, entries)


def test_profile_validation():
    g = WeightedGraph(3, [(0, 1, 1), (1, 2, 1)])
    with pytest.raises(ValueError):
        Profile(g, [ProfileEntry([0], [1])])
    with pytest.raises(ValueError):
        Profile(g, [ProfileEntry([0, 1], [0, 1])])


def test_empty_walk():
    prof = path_profile([5, 3], [1])
    w = MultiWalk()
    assert is_alternating(w, prof)
    assert gain(w, prof) == 0
    assert apply_walk(prof, w) == prof


def test_single_unmatched_edge():
    prof = path_profile([5], [])
    w = MultiWalk([(0, 0)])
    assert is_alternating(w, prof)
    assert gain(w, prof) == 5
    after = apply_walk(prof, w)
    assert after.matching(0) == frozenset({0})
    assert after.total_weight() - prof.total_weight() == 5


def test_two_consecutive_unmatched_edges():
    prof = path_profile([5, 3], [])
    assert not is_alternating(MultiWalk([(0, 0), (0, 1)]), prof)
    with pytest.raises(InvalidWalk):
        apply_walk(prof, MultiWalk([(0, 0), (0, 1)]))


def test_unmatched_then_matched():
    prof = path_profile([5, 3], [1])
    w = MultiWalk([(0, 0), (0, 1)])
    assert is_alternating(w, prof)
    assert gain(w, prof) == 2
    after = apply_walk(prof, w)
    assert after.matching(0) == frozenset({0})
    assert after.total_weight() - prof.total_weight() == 2


def test_gain_sums_signed_weights():
    prof = path_profile([5, 3, 4], [1])
    w = MultiWalk([(0, 0), (0, 1), (0, 2)])
    assert gain(w, prof) == 6
    assert apply_walk(prof, w).matching(0) == frozenset({0, 2})


def test_walk_degrees():
    prof = path_profile([5, 3, 4], [1])
    assert walk_degrees(MultiWalk([(0, 1)]), prof, 0) == (0, 0)
    assert walk_degrees(MultiWalk([(0, 1)]), prof, 1) == (1, 0)
    w = MultiWalk([(0, 0), (0, 1), (0, 2)])
    assert walk_degrees(w, prof, 1) == (1, 1)
    assert walk_degrees(w, prof, 0) == (0, 1)


def test_applicability_at_saturated_endpoint():
    prof = path_profile([5], [])
    w = MultiWalk([(0, 0)])
    assert is_applicable(w, prof, set())
    assert not is_applicable(w, prof, {0})


def test_matched_boundaries_applicable_for_any_saturated_set():
    prof = path_profile([2, 9, 2], [0, 2])
    w = MultiWalk([(0, 0), (0, 1), (0, 2)])
    assert is_applicable(w, prof, range(4))
    assert gain(w, prof) == 5


def test_multiwalk_shape():
    prof = path_profile([1, 1, 1], [], alpha=2)
    assert is_multiwalk(MultiWalk([(0, 0), (1, 1)]), prof)
    assert not is_multiwalk(MultiWalk([(0, 0), (0, 2)]), prof)
    assert not is_multiwalk(MultiWalk([(0, 0), (0, 0)]), prof)
    assert not is_multiwalk(MultiWalk([(2, 0)]), prof)
    assert walk_vertices(prof.graph, [0, 1, 2]) == [0, 1, 2, 3]
    assert walk_vertices(prof.graph, [2, 1]) == [3, 2, 1]
    assert walk_vertices(prof.graph, [0, 2]) is None


def test_key_identifies_reversals():
    w = MultiWalk([(0, 3), (1, 4), (0, 5)])
    assert w.key() == w.reversed().key()
    assert w.reversed().reversed() == w
    assert len(w + w.reversed()) == 6


def alternating_walks(prof):
    return [h.walk for h in build_H(prof, set(), 4, 100_000).hyperedges]


@pytest.mark.parametrize("seed", range(40))
def test_walk_degree_identities(make_profile, seed):
    prof = make_profile(seed, alpha=2 + seed % 2)
    g = prof.graph
    for w in alternating_walks(prof):
        vertices = walk_vertices(g, w.edges)
        first_matched = w.elements[0][1] in prof.matching(w.elements[0][0])
        last_matched = w.elements[-1][1] in prof.matching(w.elements[-1][0])
        for v in w.vertices(g):
            d, d_bar = walk_degrees(w, prof, v)
            expected = 0
            if v == vertices[0]:
                expected += 1 if first_matched else -1
            if v == vertices[-1]:
                expected += 1 if last_matched else -1
            assert d - d_bar == expected
        if first_matched and last_matched:
            assert is_applicable(w, prof, range(g.n))


@pytest.mark.parametrize("seed", range(200))
def test_gain_identity(make_profile, seed):
    rng = np.random.default_rng(seed)
    prof = make_profile(seed, n=7, m=10, alpha=2 + seed % 2)
    saturated = {v for v in range(prof.graph.n) if rng.random() < 0.3}
    H = build_H(prof, saturated, 4, 100_000)
    selected = greedy_hypergraph_matching(H)
    after = apply_walks(prof, (H.hyperedges[i].walk for i in selected))
    assert after.total_weight() - prof.total_weight() == H.gain_of(selected)
    assert H.gain_of(selected) >= 0
    for v in saturated:
        assert after.matched_count(v) <= prof.matched_count(v)
