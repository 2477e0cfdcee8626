import json
import math

import pytest

from fractions import Fraction

from matching_sparsifier.fractional import Assignment
from matching_sparsifier.graph import WeightedGraph
from matching_sparsifier.harness import (
    degree_histogram,
    eligible_pairs,
    f_unbiasedness,
    mean_se,
    prepare,
    ratio_of_means,
    run_independence_test,
    run_ratio_sweep,
    run_sparsify,
    run_trial,
    run_validity_audit,
    run_vimatch_demo,
)
from matching_sparsifier.misc import NoEligiblePairs
from matching_sparsifier.report import emit_report
from matching_sparsifier.sparsifier import Partition

HARD_AUDIT = ["fractional-validity", "gain-identity", "degree-bound", "partition"]
TWO_EDGES = WeightedGraph(4, [(0, 1, 1), (2, 3, 1)])


def criterion(report, name):
    return next(c for c in report.criteria if c.name == name)


def test_mean_se():
    assert mean_se([]) == (0.0, 0.0)
    assert mean_se([3.0]) == (3.0, 0.0)
    mean, se = mean_se([1.0, 3.0])
    assert mean == 2.0
    assert se == pytest.approx(1.0)


def test_ratio_of_means():
    assert ratio_of_means([], []) == (1.0, 0.0)
    assert ratio_of_means([0.0, 0.0], [0.0, 0.0]) == (1.0, 0.0)
    ratio, se = ratio_of_means([1.0, 2.0], [2.0, 4.0])
    assert ratio == pytest.approx(0.5)
    assert se == pytest.approx(0.0, abs=1e-12)


def test_degree_histogram():
    assert degree_histogram([0, 2, 2, 1]) == {"0": 1, "1": 1, "2": 2}


def test_eligible_pairs():
    assert eligible_pairs(TWO_EDGES, TWO_EDGES.all_edges(), 1) == [
        (0, 2), (0, 3), (1, 2), (1, 3)
    ]
    path = WeightedGraph(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1)])
    assert eligible_pairs(path, path.all_edges(), 3) == [(0, 3)]
    assert eligible_pairs(path, frozenset(), 5) == [
        (u, v) for u in range(4) for v in range(u + 1, 4)
    ]


def test_audit_on_empty_graph(make_state):
    report = run_validity_audit(make_state("er:n=0,m=0"), timestamps=False)
    assert report.passed
    assert report.metrics["ratio"] == 1.0
    assert all(t.q_size == 0 for t in report.trials)


def test_audit_hard_criteria(make_state):
    report = run_validity_audit(make_state(), timestamps=False)
    assert report.passed
    assert [c.name for c in report.criteria if c.hard] == HARD_AUDIT
    assert len(report.trials) == 3
    for trial in report.trials:
        assert trial.valid
        assert trial.residual == 0
        assert trial.mu_q <= trial.mu_full
    assert 0 <= report.metrics["ratio"] <= 1


@pytest.mark.parametrize("trials", [4, pytest.param(100, marks=pytest.mark.slow)])
def test_audit_on_varying_graphs(make_state, trials):
    state = make_state("er:n=8,m=12,wmin=1,wmax=9", trials=trials, r=16)
    state.experiment.vary_graph = True
    report = run_validity_audit(state, blossom_max=5, timestamps=False)
    assert report.passed
    assert all(t.valid for t in report.trials)
    assert len({t.seed for t in report.trials}) == trials
    assert all(c.hard for c in report.criteria)


def test_audit_catches_invalid_x(make_state):
    def overload(x: Assignment) -> Assignment:
        return x.with_value(0, Fraction(1)).with_value(1, Fraction(1))

    state = make_state("path:n=3,w=1", trials=2)
    report = run_validity_audit(state, mutate_x=overload, timestamps=False)
    assert not report.passed
    validity = criterion(report, "fractional-validity")
    assert not validity.passed
    assert "x_1 = 2 > 1" in validity.detail
    assert all("x_1 = 2 > 1" in t.witnesses for t in report.trials)


def test_audit_is_reproducible(make_state, tmp_path):
    paths = [tmp_path / "first.json", tmp_path / "second.json"]
    for path in paths:
        emit_report(run_validity_audit(make_state(), timestamps=False), path)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].with_suffix(".csv").read_bytes() == paths[1].with_suffix(".csv").read_bytes()


def test_audit_certificate(make_state, tmp_path):
    path = tmp_path / "certificate.json"
    run_validity_audit(make_state(trials=1), certificate_path=path, timestamps=False)
    cert = json.loads(path.read_text())
    assert len(cert["vertices"]) == 8
    for row in cert["edges"]:
        assert Fraction(row["x"]) <= 1


def test_run_trial_objects(make_state):
    exp = prepare(make_state())
    outcome = run_trial(exp, 0)
    assert exp.partition.crucial <= outcome.q
    assert outcome.x.support() <= outcome.q
    for e in outcome.g.support():
        assert outcome.g[e] == outcome.f[e]
    assert outcome.result.w_g <= outcome.result.w_f
    assert all(record.residual == 0 for record in outcome.trace)


def test_run_trial_checks_odd_sets_up_to_five(make_state):
    exp = prepare(make_state())
    assert math.ceil(1 / exp.state.sparsifier.epsilon) == 4
    assert run_trial(exp, 0).check.blossom_size == 5
    assert run_trial(exp, 0, blossom_max=7).check.blossom_size == 7
    report = run_validity_audit(make_state(trials=1), timestamps=False)
    assert report.metrics["blossom_size"] == 5


def test_sweep_with_certain_edges(make_state):
    state = make_state()
    state.sparsifier.p = Fraction(1)
    report = run_ratio_sweep(state, r_values=[1], timestamps=False)
    assert report.passed
    assert report.series[0]["ratio"] == 1.0


def test_sweep_on_single_edge(make_state):
    report = run_ratio_sweep(make_state("path:n=2,w=3"), r_values=[1, 2], timestamps=False)
    assert [point["ratio"] for point in report.series] == [1.0, 1.0]


@pytest.mark.parametrize("sampler_only", [False, True])
def test_sweep_is_nested(make_state, sampler_only):
    state = make_state("er:n=10,m=18,wmin=1,wmax=9")
    report = run_ratio_sweep(
        state, r_values=[8, 1, 4, 2], sampler_only=sampler_only, timestamps=False
    )
    assert report.passed
    assert [point["R"] for point in report.series] == [1, 2, 4, 8]
    sizes = [point["q_size"] for point in report.series]
    assert sizes == sorted(sizes)
    ratios = [point["ratio"] for point in report.series]
    assert ratios == sorted(ratios)
    assert all(0 <= ratio <= 1 for ratio in ratios)
    assert report.metrics["sampler_only"] == sampler_only


def test_sweep_trend_is_hard_for_sampler_only(make_state):
    state = make_state("path:n=2,w=3")
    state.sparsifier.p = Fraction(1)
    report = run_ratio_sweep(state, r_values=[1, 64], sampler_only=True, timestamps=False)
    trend = criterion(report, "ratio-trend")
    assert trend.hard
    assert not trend.passed
    assert report.metrics["ratio_trend"] == 0.0
    assert not report.passed

    report = run_ratio_sweep(state, r_values=[1, 64], sampler_only=False, timestamps=False)
    assert not criterion(report, "ratio-trend").hard
    assert report.passed


@pytest.mark.parametrize("pilot, passed", [(1.0, True), (0.99, True), (0.9, False)])
def test_sweep_against_pilot(make_state, pilot, passed):
    state = make_state("path:n=2,w=3")
    state.sparsifier.p = Fraction(1)
    state.experiment.ratio_pilot = pilot
    report = run_ratio_sweep(state, r_values=[1, 64], timestamps=False)
    assert report.series[-1]["ratio"] == 1.0
    check = criterion(report, "ratio-pilot")
    assert check.hard
    assert check.passed == passed
    assert report.passed == passed

    report = run_ratio_sweep(state, r_values=[1, 2], timestamps=False)
    assert all(c.name != "ratio-pilot" for c in report.criteria)


@pytest.mark.slow
def test_sweep_ratio_grows_with_r(make_state):
    state = make_state("er:n=16,m=40,wmin=1,wmax=10")
    state.experiment.eval_samples = 2000
    report = run_ratio_sweep(
        state, r_values=[1, 4, 16, 64], sampler_only=True, timestamps=False
    )
    assert report.passed
    assert criterion(report, "ratio-trend").hard
    assert criterion(report, "ratio-trend").passed
    assert report.metrics["ratio_trend"] >= 0.05


def test_independence_on_disjoint_edges(make_state):
    report = run_independence_test(
        make_state(), lambda_hops=2, graph=TWO_EDGES, timestamps=False
    )
    assert report.passed
    assert report.metrics["eligible_pairs"] == 4
    assert report.metrics["tested_pairs"] == 4
    assert len(report.metrics["p_values"]) == 4
    assert all(0 <= pv <= 1 for pv in report.metrics["p_values"])
    assert 0 <= report.metrics["p_value_uniformity"] <= 1
    # The two edges are realized and matched independently.
    assert min(report.metrics["p_values"]) > 1e-3


@pytest.mark.slow
def test_independence_on_disjoint_edges_many_runs(make_state):
    state = make_state()
    state.experiment.independence_runs = 5000
    report = run_independence_test(state, lambda_hops=2, graph=TWO_EDGES, timestamps=False)
    assert report.metrics["tested_pairs"] == 4
    assert report.metrics["rejected_pairs"] <= 1


def test_independence_needs_far_pairs(make_state):
    with pytest.raises(NoEligiblePairs):
        run_independence_test(make_state("path:n=2,w=1"), timestamps=False)


def test_vimatch_demo(make_state):
    state = make_state(trials=5)
    report = run_vimatch_demo(state, timestamps=False)
    assert report.passed
    assert [point["depth"] for point in report.series] == [0, 1, 2]
    assert report.series[0]["mean_weight"] == 0.0
    assert report.series[0]["mean_hyperedges"] == 0.0
    assert all(point["runs"] == 5 for point in report.series)
    assert all(Fraction(point["gain_sum"]) >= 0 for point in report.series)
    identity = criterion(report, "gain-identity")
    assert identity.hard
    assert identity.passed
    assert identity.value == 0.0


@pytest.mark.slow
def test_vimatch_demo_depths(make_state):
    state = make_state("er:n=12,m=20,wmin=1,wmax=10")
    report = run_vimatch_demo(state, runs=500, timestamps=False)
    assert report.passed
    assert criterion(report, "depth-monotone").passed
    assert report.series[2]["mean_weight"] > 0


def test_sparsify(make_state):
    report = run_sparsify(make_state(), timestamps=False)
    assert report.passed
    metrics = report.metrics
    assert metrics["R"] == 8
    assert 0 < metrics["q_threshold"] <= 1
    assert metrics["crucial_edges"] + metrics["rejected_edges"] + metrics["noncrucial_edges"] == 10
    assert metrics["q_size"] == len(metrics["q_edges"])
    assert sum(report.degree_histogram.values()) == 8


def test_f_unbiasedness(make_state):
    exp = prepare(make_state())
    estimates = f_unbiasedness(exp, 20)
    assert set(estimates) == set(exp.partition.noncrucial)
    for e, (mean, se) in estimates.items():
        assert 0 <= mean <= 1
        assert se >= 0


@pytest.mark.slow
def test_f_is_unbiased(make_state):
    state = make_state("er:n=12,m=24,wmin=1,wmax=10")
    state.sparsifier.q_samples = 2000
    exp = prepare(state)
    g = exp.graph
    # Every edge in N, so that f covers the whole graph.
    exp.partition = Partition(
        g, frozenset(), frozenset(), g.all_edges(), max(1, g.max_degree(g.all_edges())), 1, 0
    )
    estimates = f_unbiasedness(exp, 500)
    assert len(estimates) == 24
    within = 0
    for e, (mean, se) in estimates.items():
        q = float(exp.stats.q_hat[e])
        se_q = (q * (1 - q) / exp.stats.samples) ** 0.5
        if abs(mean - q) <= 3 * (se**2 + se_q**2) ** 0.5 + 1e-12:
            within += 1
    assert within >= 0.95 * len(estimates)
