import logging
import math

from fractions import Fraction
from typing import Iterable, Optional

from tqdm import tqdm

from matching_sparsifier.graph import (
    Matching,
    Probability,
    WeightedGraph,
    realization_from_seed,
)
from matching_sparsifier.matching import mwm
from matching_sparsifier.misc import (
    IterationOverflow,
    ParameterOverflow,
    at_least_scaled,
)
from matching_sparsifier.rng import RngStream
from matching_sparsifier.state import SparsifierConfig


def lambda_fn(
    delta: int,
    epsilon: Probability,
    c: int,
    cap: Optional[int] = 8,
) -> int:
    """
    The hop-distance threshold λ(Δ, ε) = ε^-24 · log Δ · (log log Δ)^C.

    Logs are base 2, the log-log factor is clamped below by 1, and the result
    is clamped to [1, cap]. Values too large to represent return `cap`.
    """
    if delta < 1:
        raise ValueError(f"Delta must be at least 1: {delta}")
    if delta == 1:
        return 1
    log_delta = math.log2(delta)
    loglog = max(1.0, math.log2(log_delta))
    try:
        value = float(epsilon) ** -24 * log_delta * loglog**c
    except (OverflowError, ZeroDivisionError):
        value = math.inf
    if not math.isfinite(value):
        if cap is None:
            raise ParameterOverflow(f"lambda({delta}, {epsilon}) is not finite")
        return cap
    lam = max(1, math.ceil(value))
    return lam if cap is None else min(cap, lam)


class EdgeStats:
    """
    Monte Carlo estimates of q_e = Pr[e ∈ MM(𝒢)], χ_e = q_e·w_e and
    opt = E[μ(𝒢)], all from one shared pass of realizations.
    """

    def __init__(
        self,
        graph: WeightedGraph,
        matched_counts: list[int],
        total_weight: Fraction,
        samples: int,
    ) -> None:
        self.graph = graph
        self.matched_counts = matched_counts
        self.samples = samples
        self.q_hat = [Fraction(c, samples) for c in matched_counts]
        self.chi_hat = [q * graph.weight(e) for e, q in enumerate(self.q_hat)]
        self.opt_hat = total_weight / samples

    def chi_of(self, edge_set: Iterable[int]) -> Fraction:
        return sum((self.chi_hat[e] for e in edge_set), Fraction(0))

    def q_at(self, v: int, edge_set: Optional[frozenset[int]] = None) -> Fraction:
        """
        Σ q̂_e over edges at `v`, restricted to `edge_set` when given.
        """
        return sum(
            (
                self.q_hat[e]
                for e in self.graph.incident(v)
                if edge_set is None or e in edge_set
            ),
            Fraction(0),
        )


def estimate_edge_stats(
    g: WeightedGraph, p: Probability, n_q: int, rng: RngStream
) -> EdgeStats:
    if n_q < 1:
        raise ValueError(f"Sample count must be positive: {n_q}")
    logging.debug(f"Estimating edge statistics over {n_q} realizations...")
    counts = [0] * g.m
    total = Fraction(0)
    for i in range(n_q):
        realization = realization_from_seed(g, p, rng.child(i).seed)
        matching = mwm(g, realization.realized)
        for e in matching.edges:
            counts[e] += 1
        total += matching.weight
    return EdgeStats(g, counts, total, n_q)


def estimate_opt(
    g: WeightedGraph, p: Probability, n_opt: int, rng: RngStream
) -> Fraction:
    """
    An estimate of E[μ(𝒢)] independent of the edge-statistics pass.
    """
    if n_opt < 1:
        raise ValueError(f"Sample count must be positive: {n_opt}")
    total = Fraction(0)
    for i in range(n_opt):
        realization = realization_from_seed(g, p, rng.child(i).seed)
        total += mwm(g, realization.realized).weight
    return total / n_opt


class Partition:
    """
    E = P ⊔ I' ⊔ N as left by the greedy stage.

    `crucial` is P, `rejected` the last candidate set I' that failed the
    weight test, `noncrucial` the remainder N. `delta` and `lam` are the
    values of the final loop pass.
    """

    def __init__(
        self,
        graph: WeightedGraph,
        crucial: frozenset[int],
        rejected: frozenset[int],
        noncrucial: frozenset[int],
        delta: int,
        lam: int,
        iterations: int,
    ) -> None:
        self.graph = graph
        self.crucial = crucial
        self.rejected = rejected
        self.noncrucial = noncrucial
        self.delta = delta
        self.lam = lam
        self.iterations = iterations

    def is_complete(self) -> bool:
        parts = (self.crucial, self.rejected, self.noncrucial)
        disjoint = sum(len(x) for x in parts) == len(frozenset().union(*parts))
        return disjoint and frozenset().union(*parts) == self.graph.all_edges()


def _threshold_coefficient(cfg: SparsifierConfig) -> Fraction:
    return cfg.p**2 * cfg.epsilon**10


def greedy_subgraph(
    g: WeightedGraph, stats: EdgeStats, cfg: SparsifierConfig
) -> Partition:
    """
    Grows P by whole candidate sets I = I_q ∪ I_d while χ̂(I) ≥ ε·opt̂.

    I_q holds the edges outside P with q̂_e ≥ p²ε¹⁰Δ^-λ; I_d those whose
    endpoints are fewer than λ hops apart within P. Δ and λ are fixed at the
    top of each pass.
    """
    coefficient = _threshold_coefficient(cfg)
    limit = math.ceil(1 / cfg.epsilon)
    crucial: set[int] = set()
    iterations = 0

    while True:
        if iterations > limit:
            raise IterationOverflow(
                f"Greedy stage ran {iterations} iterations, limit {limit}"
            )
        delta = max(1, g.max_degree(crucial))
        lam = lambda_fn(delta, cfg.epsilon, cfg.lambda_constant, cfg.lambda_cap)
        distances = g.hop_distances(crucial)

        candidates: set[int] = set()
        for e in range(g.m):
            if e in crucial:
                continue
            u, v = g.endpoints(e)
            if at_least_scaled(stats.q_hat[e], coefficient, delta, lam):
                candidates.add(e)
            elif distances[u, v] < lam:
                candidates.add(e)

        chi = stats.chi_of(candidates)
        logging.debug(
            f"Greedy pass {iterations}: delta={delta}, lambda={lam}, "
            f"|I|={len(candidates)}, chi(I)={float(chi):.4f}"
        )
        if chi > 0 and chi >= cfg.epsilon * stats.opt_hat:
            crucial |= candidates
            iterations += 1
            continue

        rejected = frozenset(candidates)
        return Partition(
            g,
            frozenset(crucial),
            rejected,
            g.all_edges() - crucial - rejected,
            delta,
            lam,
            iterations,
        )


def check_partition(
    g: WeightedGraph,
    partition: Partition,
    stats: EdgeStats,
    cfg: SparsifierConfig,
) -> list[str]:
    """
    Returns the violated partition properties, or an empty list.
    """
    problems: list[str] = []
    if not partition.is_complete():
        problems.append("P, I' and N do not partition E")
    if partition.delta != max(1, g.max_degree(partition.crucial)):
        problems.append(f"Stored delta {partition.delta} is not the degree of P")
    if partition.iterations > math.ceil(1 / cfg.epsilon):
        problems.append(f"{partition.iterations} greedy iterations")

    coefficient = _threshold_coefficient(cfg)
    distances = g.hop_distances(partition.crucial)
    for e in sorted(partition.noncrucial):
        u, v = g.endpoints(e)
        if at_least_scaled(
            stats.q_hat[e], coefficient, partition.delta, partition.lam
        ):
            problems.append(f"Edge {e} in N has a large q")
        if distances[u, v] < partition.lam:
            problems.append(f"Edge {e} in N is close within P")

    kept = stats.chi_of(partition.crucial) + stats.chi_of(partition.noncrucial)
    if kept < (1 - cfg.epsilon) * stats.chi_of(g.all_edges()):
        problems.append("chi(P) + chi(N) < (1 - epsilon) chi(E)")
    return problems


def r_value(cfg: SparsifierConfig, delta: int, lam: int) -> int:
    """
    The number of sampled matchings: the override when set, else
    ⌈p⁻²ε⁻¹⁰Δ^λ⌉ clamped to `r_cap`.
    """
    if cfg.r_override is not None:
        return cfg.r_override
    if cfg.p <= 0:
        raise ParameterOverflow("R is unbounded for p = 0")
    formula = math.ceil(Fraction(delta) ** lam / _threshold_coefficient(cfg))
    if formula <= cfg.r_cap:
        return max(1, formula)
    if cfg.strict_r:
        raise ParameterOverflow(
            f"R = {formula} exceeds the cap of {cfg.r_cap}; set r_override"
        )
    logging.warning(f"R = {formula} clamped to {cfg.r_cap}")
    return cfg.r_cap


class SparsifierOutput:
    """
    The sampled matchings MM(𝒢₁) … MM(𝒢_R) and their union S.
    """

    def __init__(self, graph: WeightedGraph, matchings: list[Matching]) -> None:
        self.graph = graph
        self.matchings = tuple(matchings)
        self.union: frozenset[int] = frozenset().union(
            *(m.edges for m in matchings)
        )

    @property
    def r(self) -> int:
        return len(self.matchings)

    def prefix(self, r: int) -> "SparsifierOutput":
        """
        The output of the first `r` rounds, as a run with R = r on the same
        stream would have produced.
        """
        if not 1 <= r <= self.r:
            raise ValueError(f"Prefix length must lie in [1, {self.r}]: {r}")
        return SparsifierOutput(self.graph, list(self.matchings[:r]))

    def counts(self) -> list[int]:
        counts = [0] * self.graph.m
        for matching in self.matchings:
            for e in matching.edges:
                counts[e] += 1
        return counts


def sampling_subgraph(
    g: WeightedGraph,
    cfg: SparsifierConfig,
    delta: int,
    rng: RngStream,
    progress: bool = False,
) -> SparsifierOutput:
    """
    Unions the canonical matchings of R independent realizations.

    Round i draws from `rng.child(i)`, so runs with different R on the same
    stream share their common prefix.
    """
    lam = lambda_fn(delta, cfg.epsilon, cfg.lambda_constant, cfg.lambda_cap)
    r = r_value(cfg, delta, lam)
    logging.debug(f"Sampling {r} matchings (delta={delta}, lambda={lam})...")
    matchings = [
        mwm(g, realization_from_seed(g, cfg.p, rng.child(i).seed).realized)
        for i in tqdm(range(r), disable=not progress, desc="Sampling")
    ]
    return SparsifierOutput(g, matchings)


def build_Q(partition: Partition, sampler: SparsifierOutput) -> frozenset[int]:
    """
    Q = S ∪ P.
    """
    assert partition.graph is sampler.graph, "P and S come from different graphs"
    return sampler.union | partition.crucial


def degree_violations(
    partition: Partition, r: int, q: Iterable[int]
) -> list[tuple[int, int, int]]:
    """
    (v, deg_Q(v), R + deg_P(v)) for every vertex above its degree bound.
    """
    g = partition.graph
    degree_q = g.degrees(q)
    degree_p = g.degrees(partition.crucial)
    return [
        (v, degree_q[v], r + degree_p[v])
        for v in range(g.n)
        if degree_q[v] > r + degree_p[v]
    ]
