import pytest

from fractions import Fraction

from matching_sparsifier.graph import WeightedGraph, erdos_renyi, is_matching
from matching_sparsifier.matching import mwm
from matching_sparsifier.misc import RecursionBudgetExceeded
from matching_sparsifier.rng import Purpose, RngStream
from matching_sparsifier.state import VimatchParams
from matching_sparsifier.vimatch import (
    ReferenceAlgorithm,
    SaturationTable,
    TraceRecord,
    VertexIndependentMatcher,
    findmatching,
)

EPSILON = Fraction(3, 10)
P = Fraction(1, 2)


def small_params(**kwargs):
    params = VimatchParams(k_gamma=8, walk_cap=2000)
    for key, value in kwargs.items():
        setattr(params, key, value)
    return params


def test_saturation_table():
    table = SaturationTable(
        [Fraction(0), Fraction(1)], [Fraction(1, 2), Fraction(1, 2)], EPSILON, 3
    )
    assert table.saturated == frozenset({1})


def test_reference_algorithm_without_outside_edges():
    g = erdos_renyi(6, 8, RngStream(1))
    reference = ReferenceAlgorithm(g, g.all_edges(), P)
    h = frozenset(range(0, g.m, 2))
    assert reference(h, RngStream(0)) == mwm(g, h).edges


def test_reference_algorithm_stays_inside_h():
    g = erdos_renyi(6, 8, RngStream(2))
    crucial = frozenset(range(4))
    reference = ReferenceAlgorithm(g, crucial, P)
    for k in range(10):
        result = reference(crucial, RngStream(k))
        assert result <= crucial
        assert is_matching(g, result)


def test_depth_zero_is_empty():
    g = WeightedGraph(2, [(0, 1, 4)])
    m = findmatching(g, {0}, 0, {0}, P, EPSILON, small_params(), RngStream(0))
    assert len(m) == 0
    assert m.weight == 0


def test_depth_one_single_edge():
    g = WeightedGraph(2, [(0, 1, 4)])
    params = small_params(alpha=2, l=1)
    m = findmatching(g, {0}, 1, {0}, Fraction(1), EPSILON, params, RngStream(0))
    assert m.edges == frozenset({0})


@pytest.mark.parametrize("seed", range(8))
def test_result_is_matching_of_realization(seed):
    g = erdos_renyi(8, 11, RngStream(seed))
    matcher = VertexIndependentMatcher(
        g, g.all_edges(), P, EPSILON, small_params(), RngStream(seed).child(0)
    )
    for r in (1, 2):
        realization = matcher.realize(RngStream(seed).child(1, r))
        m = matcher.findmatching(r, realization, RngStream(seed).child(2, r))
        assert m.edges <= realization
        assert is_matching(g, m.edges)


def test_trace_records_every_level_with_zero_residual():
    g = erdos_renyi(7, 10, RngStream(3))
    params = small_params(alpha=3, t=2)
    matcher = VertexIndependentMatcher(
        g, g.all_edges(), P, EPSILON, params, RngStream(3).for_purpose(Purpose.VIMATCH)
    )
    trace: list[TraceRecord] = []
    matcher.findmatching(2, g.all_edges(), RngStream(4), trace)
    # One top-level record plus one per depth-one subcall.
    assert [record.depth for record in trace].count(2) == 1
    assert [record.depth for record in trace].count(1) == 3
    assert all(record.residual == 0 for record in trace)
    assert all(record.gain_sum >= 0 for record in trace)
    assert trace[-1].to_dict()["depth"] == 2


def test_reproducible_across_matchers():
    g = erdos_renyi(7, 10, RngStream(5))
    results = []
    for _ in range(2):
        matcher = VertexIndependentMatcher(
            g, g.all_edges(), P, EPSILON, small_params(), RngStream(5).child(0)
        )
        results.append(matcher.findmatching(2, g.all_edges(), RngStream(6)))
    assert results[0] == results[1]


def test_invalid_calls():
    g = WeightedGraph(3, [(0, 1, 1), (1, 2, 1)])
    matcher = VertexIndependentMatcher(g, {0}, P, EPSILON, small_params(), RngStream(0))
    with pytest.raises(ValueError):
        matcher.findmatching(-1, set(), RngStream(1))
    with pytest.raises(ValueError):
        matcher.findmatching(1, {1}, RngStream(1))


def test_recursion_budget():
    g = WeightedGraph(2, [(0, 1, 1)])
    params = small_params(recursion_budget=100)
    matcher = VertexIndependentMatcher(g, {0}, P, EPSILON, params, RngStream(0))
    matcher.check_budget(1)
    with pytest.raises(RecursionBudgetExceeded):
        matcher.findmatching(3, {0}, RngStream(1))


def test_asymptotic_parameters_trip_the_budget():
    params = VimatchParams(asymptotic=True).resolved(EPSILON)
    g = WeightedGraph(2, [(0, 1, 1)])
    matcher = VertexIndependentMatcher(g, {0}, P, EPSILON, params, RngStream(0))
    with pytest.raises(RecursionBudgetExceeded):
        matcher.check_budget(params.t)
    assert params.alpha > params.recursion_budget // (1 + params.k_gamma)
