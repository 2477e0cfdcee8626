import logging
import math

from enum import StrEnum
from fractions import Fraction
from typing import Any, Iterable, Iterator, Optional

from matching_sparsifier.graph import (
    Matching,
    Probability,
    Realization,
    WeightedGraph,
    sample_edges,
)
from matching_sparsifier.misc import DegenerateDenominator, at_most_scaled
from matching_sparsifier.rng import RngStream
from matching_sparsifier.sparsifier import EdgeStats, Partition, SparsifierOutput
from matching_sparsifier.state import SparsifierConfig, VimatchParams
from matching_sparsifier.vimatch import TraceRecord, VertexIndependentMatcher


class AssignmentKind(StrEnum):
    F = "f"
    G = "g"
    H = "h"
    X = "x"


class Assignment:
    """
    Nonnegative rational values on edge indices; absent edges are 0.
    """

    def __init__(
        self,
        graph: WeightedGraph,
        kind: AssignmentKind,
        values: Optional[dict[int, Fraction]] = None,
    ) -> None:
        self.graph = graph
        self.kind = kind
        self.values: dict[int, Fraction] = {
            e: Fraction(a) for e, a in (values or {}).items() if a != 0
        }

    def __getitem__(self, e: int) -> Fraction:
        return self.values.get(e, Fraction(0))

    def support(self) -> frozenset[int]:
        return frozenset(self.values)

    def load(self, v: int) -> Fraction:
        return sum((self[e] for e in self.graph.incident(v)), Fraction(0))

    def loads(self) -> list[Fraction]:
        loads = [Fraction(0)] * self.graph.n
        for e, a in self.values.items():
            u, v = self.graph.endpoints(e)
            loads[u] += a
            loads[v] += a
        return loads

    def weight(self) -> Fraction:
        return assignment_weight(self, self.graph)

    def with_value(self, e: int, value: Fraction) -> "Assignment":
        values = dict(self.values)
        values[e] = value
        return Assignment(self.graph, self.kind, values)


def assignment_weight(a: Assignment, g: WeightedGraph) -> Fraction:
    return sum((value * g.weight(e) for e, value in a.values.items()), Fraction(0))


class ZContext:
    """
    The matching Z on realized crucial edges, with per-vertex estimates of
    Pr[v ∈ V(Z)] and q̂^P_v = Σ_{e ∋ v, e ∈ P} q̂_e.
    """

    def __init__(
        self,
        z: Matching,
        prob_in_z: list[Fraction],
        q_p: list[Fraction],
        raw_prob_in_z: Optional[list[Fraction]] = None,
    ) -> None:
        self.z = z
        self.prob_in_z = prob_in_z
        self.q_p = q_p
        self.raw_prob_in_z = raw_prob_in_z if raw_prob_in_z is not None else prob_in_z


class ZBuilder:
    """
    Builds Z for many realizations of one partition.

    The matcher's tables and the rerun estimate of Pr[v ∈ V(Z)] are shared
    by every Z the builder produces.
    """

    def __init__(
        self,
        g: WeightedGraph,
        partition: Partition,
        stats: EdgeStats,
        p: Probability,
        epsilon: Fraction,
        params: VimatchParams,
        rng: RngStream,
    ) -> None:
        self.graph = g
        self.partition = partition
        self.p = p
        self.epsilon = Fraction(epsilon)
        self.params = params.resolved(self.epsilon)
        self.rng = rng
        self.matcher = VertexIndependentMatcher(
            g, partition.crucial, p, self.epsilon, self.params, rng.child(0)
        )
        self.q_p = [stats.q_at(v, partition.crucial) for v in range(g.n)]
        self._prob: Optional[list[Fraction]] = None
        self._raw_prob: Optional[list[Fraction]] = None

    def draw(
        self,
        realized_crucial: frozenset[int],
        rng: RngStream,
        trace: Optional[list[TraceRecord]] = None,
    ) -> Matching:
        """
        findmatching(t) on the realized crucial edges, then each edge dropped
        independently with probability ε.
        """
        if len(self.partition.crucial) == 0:
            return Matching(self.graph, ())
        matched = self.matcher.findmatching(
            self.params.t, realized_crucial, rng.child(0), trace
        )
        dropped = sample_edges(matched.edges, self.epsilon, rng.child(1).seed)
        return Matching(self.graph, matched.edges - dropped)

    def probabilities(self) -> list[Fraction]:
        """
        Rerun frequencies of v ∈ V(Z), clamped to 1 − ε.
        """
        if self._prob is None:
            n = self.graph.n
            counts = [0] * n
            if len(self.partition.crucial) > 0:
                stream = self.rng.child(1)
                for k in range(self.params.k_z):
                    realized = self.matcher.realize(stream.child(k, 0))
                    z = self.draw(realized, stream.child(k, 1))
                    for v in z.vertices:
                        counts[v] += 1
            raw = [Fraction(c, self.params.k_z) for c in counts]
            cap = 1 - self.epsilon
            clamped = [min(prob, cap) for prob in raw]
            over = [v for v in range(n) if raw[v] > cap]
            if over:
                logging.warning(
                    f"Clamped Pr[v in Z] to {cap} at {len(over)} vertices"
                )
            self._raw_prob = raw
            self._prob = clamped
        return self._prob

    def raw_probabilities(self) -> list[Fraction]:
        """
        The rerun frequencies before clamping.
        """
        self.probabilities()
        assert self._raw_prob is not None
        return self._raw_prob

    def build(
        self,
        realization: Realization,
        rng: RngStream,
        trace: Optional[list[TraceRecord]] = None,
    ) -> ZContext:
        prob = self.probabilities()
        z = self.draw(realization.realized & self.partition.crucial, rng, trace)
        return ZContext(z, prob, self.q_p, self._raw_prob)


def build_Z(
    g: WeightedGraph,
    partition: Partition,
    realization: Realization,
    params: VimatchParams,
    rng: RngStream,
    stats: EdgeStats,
    p: Probability,
    epsilon: Fraction,
) -> ZContext:
    builder = ZBuilder(g, partition, stats, p, epsilon, params, rng.child(0))
    return builder.build(realization, rng.child(1))


def compute_f(sampler: SparsifierOutput, partition: Partition) -> Assignment:
    """
    f_e is the fraction of sampled matchings containing e, on N only.
    """
    counts = sampler.counts()
    return Assignment(
        sampler.graph,
        AssignmentKind.F,
        {e: Fraction(counts[e], sampler.r) for e in partition.noncrucial},
    )


def compute_g(
    f: Assignment, zctx: ZContext, partition: Partition, cfg: SparsifierConfig
) -> Assignment:
    """
    Keeps f_e when f_e ≤ p²ε⁷Δ^-λ and both endpoint loads satisfy
    f_u ≤ 1 − q̂^P_u + ε³; zero otherwise.
    """
    g = f.graph
    loads = f.loads()
    coefficient = cfg.p**2 * cfg.epsilon**7
    slack = cfg.epsilon**3
    values: dict[int, Fraction] = {}
    for e, value in f.values.items():
        if not at_most_scaled(value, coefficient, partition.delta, partition.lam):
            continue
        u, v = g.endpoints(e)
        if loads[u] > 1 - zctx.q_p[u] + slack or loads[v] > 1 - zctx.q_p[v] + slack:
            continue
        values[e] = value
    return Assignment(g, AssignmentKind.G, values)


def compute_h(
    g_assign: Assignment,
    zctx: ZContext,
    realization: Realization,
    p: Probability,
    epsilon: Fraction,
) -> Assignment:
    """
    h_e = g_e / (p · Pr[u ∉ Z] · Pr[v ∉ Z]) on realized edges whose endpoints
    Z leaves free.
    """
    g = g_assign.graph
    covered = zctx.z.vertices
    values: dict[int, Fraction] = {}
    for e, value in g_assign.values.items():
        if e not in realization:
            continue
        u, v = g.endpoints(e)
        if u in covered or v in covered:
            continue
        free_u = 1 - zctx.prob_in_z[u]
        free_v = 1 - zctx.prob_in_z[v]
        if free_u < epsilon or free_v < epsilon:
            raise DegenerateDenominator(
                f"Pr[not in Z] below epsilon at edge {e}: {free_u}, {free_v}"
            )
        values[e] = value / (Fraction(p) * free_u * free_v)
    return Assignment(g, AssignmentKind.H, values)


def compute_x(h: Assignment, zctx: ZContext, epsilon: Fraction) -> Assignment:
    """
    On N, h scaled by 1/(1+3ε) where both endpoint loads of h are at most
    1+3ε; on P, the indicator of Z. Everything else is 0.
    """
    g = h.graph
    cap = 1 + 3 * Fraction(epsilon)
    loads = h.loads()
    values: dict[int, Fraction] = {}
    for e, value in h.values.items():
        u, v = g.endpoints(e)
        if loads[u] <= cap and loads[v] <= cap:
            values[e] = value / cap
    for e in zctx.z.edges:
        values[e] = Fraction(1)
    return Assignment(g, AssignmentKind.X, values)


def _connected_subsets(
    adjacency: dict[int, set[int]], max_size: int
) -> Iterator[frozenset[int]]:
    """
    Every connected vertex set of size at most `max_size`, once each.
    """

    def extend(
        subset: frozenset[int], extension: list[int], root: int
    ) -> Iterator[frozenset[int]]:
        yield subset
        if len(subset) == max_size:
            return
        extension = sorted(extension)
        neighbourhood = set(subset).union(*(adjacency[x] for x in subset))
        while extension:
            w = extension.pop(0)
            exclusive = [
                u for u in adjacency[w] if u > root and u not in neighbourhood
            ]
            yield from extend(subset | {w}, extension + exclusive, root)

    for v in sorted(adjacency):
        yield from extend(
            frozenset([v]), [u for u in adjacency[v] if u > v], v
        )


class FractionalReport:
    """
    Outcome of the fractional-matching checks, with witnesses.
    """

    def __init__(self) -> None:
        self.vertex_violations: list[tuple[int, Fraction]] = []
        self.negative_edges: list[int] = []
        self.support_violations: list[int] = []
        self.blossom_violations: list[tuple[tuple[int, ...], Fraction]] = []
        self.blossom_size = 0
        self.subsets_checked = 0

    @property
    def passed(self) -> bool:
        return not (
            self.vertex_violations
            or self.negative_edges
            or self.support_violations
            or self.blossom_violations
        )

    def witnesses(self) -> list[str]:
        return (
            [f"x_{v} = {load} > 1" for v, load in self.vertex_violations]
            + [f"x_e < 0 on edge {e}" for e in self.negative_edges]
            + [f"edge {e} outside realized Q" for e in self.support_violations]
            + [
                f"x({list(u)}) = {value} > {(len(u) - 1) // 2}"
                for u, value in self.blossom_violations
            ]
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "blossom_size": self.blossom_size,
            "subsets_checked": self.subsets_checked,
            "witnesses": self.witnesses(),
        }


def check_fractional(
    x: Assignment,
    g: WeightedGraph,
    q: Iterable[int],
    realization: Realization,
    epsilon: Fraction,
    blossom_cap: int = 7,
    max_size: Optional[int] = None,
) -> FractionalReport:
    """
    Checks vertex loads, signs, support and the odd-set constraints
    x(U) ≤ (|U|−1)/2 for odd |U| ≤ min(⌈1/ε⌉, blossom_cap), or `max_size`.

    Only sets connected in the support of x are enumerated: a disconnected
    odd set splits into components whose bounds sum to the same bound once
    every load is at most 1.
    """
    report = FractionalReport()
    q = frozenset(q)

    for v, load in enumerate(x.loads()):
        if load > 1:
            report.vertex_violations.append((v, load))
    for e, value in sorted(x.values.items()):
        if value < 0:
            report.negative_edges.append(e)
        if e not in q or e not in realization:
            report.support_violations.append(e)

    size = max_size if max_size is not None else min(
        math.ceil(1 / Fraction(epsilon)), blossom_cap
    )
    report.blossom_size = size

    adjacency: dict[int, set[int]] = {}
    for e in x.values:
        u, v = g.endpoints(e)
        adjacency.setdefault(u, set()).add(v)
        adjacency.setdefault(v, set()).add(u)

    for subset in _connected_subsets(adjacency, size):
        if len(subset) < 3 or len(subset) % 2 == 0:
            continue
        report.subsets_checked += 1
        inside = sum(
            (
                value
                for e, value in x.values.items()
                if set(g.endpoints(e)) <= subset
            ),
            Fraction(0),
        )
        if inside > Fraction(len(subset) - 1, 2):
            report.blossom_violations.append((tuple(sorted(subset)), inside))

    return report


def certificate(
    g: WeightedGraph,
    f: Assignment,
    g_assign: Assignment,
    h: Assignment,
    x: Assignment,
) -> dict[str, Any]:
    """
    Per-edge values and per-vertex loads of the four assignments.
    """
    assignments = (f, g_assign, h, x)
    loads = [a.loads() for a in assignments]
    return {
        "edges": [
            {"edge": e, **{str(a.kind): str(a[e]) for a in assignments}}
            for e in range(g.m)
            if any(a[e] != 0 for a in assignments)
        ],
        "vertices": [
            {
                "vertex": v,
                **{str(a.kind): str(loads[i][v]) for i, a in enumerate(assignments)},
            }
            for v in range(g.n)
        ],
    }
