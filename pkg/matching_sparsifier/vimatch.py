import logging

from fractions import Fraction
from typing import Iterable, Optional

from matching_sparsifier.graph import Matching, Probability, WeightedGraph, sample_edges
from matching_sparsifier.hypergraph import build_H, greedy_hypergraph_matching
from matching_sparsifier.matching import mwm
from matching_sparsifier.misc import RecursionBudgetExceeded
from matching_sparsifier.rng import RngStream
from matching_sparsifier.state import VimatchParams
from matching_sparsifier.walks import Profile, ProfileEntry, apply_walks


class SaturationTable:
    """
    Per-vertex saturation at one recursion depth.

    A vertex is saturated when its estimated match probability one level
    down exceeds its target plus ε³ − 1/α.
    """

    def __init__(
        self,
        gamma_prev: list[Fraction],
        target: list[Fraction],
        epsilon: Fraction,
        alpha: int,
    ) -> None:
        self.gamma_prev = gamma_prev
        self.target = target
        self.epsilon = epsilon
        self.alpha = alpha
        slack = epsilon**3 - Fraction(1, alpha)
        self.saturated = frozenset(
            v
            for v in range(len(target))
            if not gamma_prev[v] <= target[v] + slack
        )


class ReferenceAlgorithm:
    """
    𝒜(H) = MM(H ∪ 𝒩) ∩ H, where 𝒩 keeps each edge outside the crucial set
    independently with probability p.
    """

    def __init__(
        self, g: WeightedGraph, crucial: frozenset[int], p: Probability
    ) -> None:
        self.graph = g
        self.crucial = crucial
        self.p = p
        self._outside = g.all_edges() - crucial

    def __call__(self, h: Iterable[int], rng: RngStream) -> frozenset[int]:
        h = frozenset(h)
        extension = sample_edges(self._outside, self.p, rng.seed)
        return mwm(self.graph, h | extension).edges & h


class TraceRecord:
    """
    One level of a findmatching call: how many vertices were saturated, how
    large H got, and what the selected walks gained.
    """

    def __init__(
        self,
        depth: int,
        alpha: int,
        saturated: int,
        hyperedges: int,
        selected: int,
        gain_sum: Fraction,
        residual: Fraction,
        truncated: bool,
    ) -> None:
        self.depth = depth
        self.alpha = alpha
        self.saturated = saturated
        self.hyperedges = hyperedges
        self.selected = selected
        self.gain_sum = gain_sum
        self.residual = residual
        self.truncated = truncated

    def to_dict(self) -> dict[str, object]:
        return {
            "depth": self.depth,
            "alpha": self.alpha,
            "saturated": self.saturated,
            "hyperedges": self.hyperedges,
            "selected": self.selected,
            "gain_sum": str(self.gain_sum),
            "residual": str(self.residual),
            "truncated": self.truncated,
        }


def _vertex_frequencies(
    n: int, matchings: list[frozenset[int]], g: WeightedGraph
) -> list[Fraction]:
    counts = [0] * n
    for m in matchings:
        for v in g.touched(m):
            counts[v] += 1
    return [Fraction(c, len(matchings)) for c in counts]


class VertexIndependentMatcher:
    """
    The recursive findmatching procedure on realizations of one crucial
    edge set.

    Target probabilities Pr[v ∈ 𝒜(𝒢')] and the per-depth estimates
    Pr[v ∈ findmatching(r, 𝒢')] are computed on first use and kept for the
    lifetime of the matcher; they draw from `rng`, never from the per-call
    streams.
    """

    def __init__(
        self,
        g: WeightedGraph,
        crucial: Iterable[int],
        p: Probability,
        epsilon: Fraction,
        params: VimatchParams,
        rng: RngStream,
    ) -> None:
        self.graph = g
        self.crucial = frozenset(crucial)
        self.p = p
        self.epsilon = Fraction(epsilon)
        self.params = params
        self.rng = rng
        self.reference = ReferenceAlgorithm(g, self.crucial, p)
        self._targets: Optional[list[Fraction]] = None
        self._gamma: dict[int, list[Fraction]] = {}
        self._tables: dict[int, SaturationTable] = {}

    def check_budget(self, r: int) -> None:
        calls = 1 + self.params.k_gamma
        for _ in range(r):
            calls *= self.params.alpha
            if calls > self.params.recursion_budget:
                raise RecursionBudgetExceeded(
                    f"Depth {r} with alpha={self.params.alpha} needs more than "
                    f"{self.params.recursion_budget} calls"
                )

    def realize(self, rng: RngStream) -> frozenset[int]:
        return sample_edges(self.crucial, self.p, rng.seed)

    def targets(self) -> list[Fraction]:
        if self._targets is None:
            logging.debug(f"Estimating reference targets over {self.params.k_gamma} runs")
            stream = self.rng.child(1)
            runs = [
                self.reference(self.realize(stream.child(k, 0)), stream.child(k, 1))
                for k in range(self.params.k_gamma)
            ]
            self._targets = _vertex_frequencies(self.graph.n, runs, self.graph)
        return self._targets

    def gamma(self, r: int) -> list[Fraction]:
        """
        Estimated Pr[v ∈ findmatching(r, 𝒢')] over fresh realizations.
        """
        if r == 0:
            return [Fraction(0)] * self.graph.n
        if r not in self._gamma:
            logging.debug(f"Estimating depth-{r} match probabilities")
            stream = self.rng.child(2, r)
            runs = [
                self.findmatching(
                    r, self.realize(stream.child(k, 0)), stream.child(k, 1)
                ).edges
                for k in range(self.params.k_gamma)
            ]
            self._gamma[r] = _vertex_frequencies(self.graph.n, runs, self.graph)
        return self._gamma[r]

    def saturation(self, r: int) -> SaturationTable:
        if r not in self._tables:
            self._tables[r] = SaturationTable(
                self.gamma(r - 1), self.targets(), self.epsilon, self.params.alpha
            )
        return self._tables[r]

    def findmatching(
        self,
        r: int,
        realization: Iterable[int],
        rng: RngStream,
        trace: Optional[list[TraceRecord]] = None,
    ) -> Matching:
        if r < 0:
            raise ValueError(f"Depth must be nonnegative: {r}")
        realization = frozenset(realization)
        if not realization <= self.crucial:
            raise ValueError("Realization has edges outside the crucial set")
        if r == 0:
            return Matching(self.graph, ())
        self.check_budget(r)

        alpha = self.params.alpha
        subgraphs = [realization] + [
            self.realize(rng.child(0, i)) for i in range(1, alpha)
        ]
        entries = [
            ProfileEntry(
                sub, self.findmatching(r - 1, sub, rng.child(1, i), trace).edges
            )
            for i, sub in enumerate(subgraphs)
        ]
        profile = Profile(self.graph, entries)

        table = self.saturation(r)
        H = build_H(profile, table.saturated, self.params.l, self.params.walk_cap)
        selected = greedy_hypergraph_matching(H)
        updated = apply_walks(profile, (H.hyperedges[i].walk for i in selected))

        gain_sum = H.gain_of(selected)
        residual = updated.total_weight() - profile.total_weight() - gain_sum
        if trace is not None:
            trace.append(
                TraceRecord(
                    r,
                    alpha,
                    len(table.saturated),
                    len(H),
                    len(selected),
                    gain_sum,
                    residual,
                    H.truncated,
                )
            )
        return Matching(self.graph, updated.matching(0))


def findmatching(
    g: WeightedGraph,
    crucial: Iterable[int],
    r: int,
    realization: Iterable[int],
    p: Probability,
    epsilon: Fraction,
    params: VimatchParams,
    rng: RngStream,
    trace: Optional[list[TraceRecord]] = None,
) -> Matching:
    """
    One-shot findmatching(r, realization) with a fresh matcher.
    """
    matcher = VertexIndependentMatcher(g, crucial, p, epsilon, params, rng.child(0))
    return matcher.findmatching(r, realization, rng.child(1), trace)
