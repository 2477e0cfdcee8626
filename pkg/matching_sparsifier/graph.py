import logging
import numpy as np

from fractions import Fraction
from pathlib import Path
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path
from typing import Iterable, Optional, Union

from matching_sparsifier.misc import ParseError
from matching_sparsifier.rng import RngStream, generator_from_seed


Probability = Union[Fraction, float]


class WeightedGraph:
    """
    An immutable simple graph with indexed, nonnegatively weighted edges.

    Edge `i` is always the `i`-th entry of `edges`; everything else in the
    package refers to edges by that index.
    """

    def __init__(
        self, n: int, edges: Iterable[tuple[int, int, Fraction]]
    ) -> None:
        if n < 0:
            raise ValueError(f"Vertex count must be nonnegative: {n}")
        normalized: list[tuple[int, int, Fraction]] = []
        seen: set[tuple[int, int]] = set()
        for index, (u, v, w) in enumerate(edges):
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"Edge {index} has an endpoint outside [0, {n})")
            if u == v:
                raise ValueError(f"Edge {index} is a self-loop on {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"Edge {index} duplicates the pair {key}")
            w = Fraction(w)
            if w < 0:
                raise ValueError(f"Edge {index} has a negative weight {w}")
            seen.add(key)
            normalized.append((u, v, w))

        adjacency: list[list[int]] = [[] for _ in range(n)]
        for index, (u, v, _) in enumerate(normalized):
            adjacency[u].append(index)
            adjacency[v].append(index)

        self._n = n
        self._edges = tuple(normalized)
        self._adjacency = tuple(tuple(a) for a in adjacency)

    @property
    def n(self) -> int:
        return self._n

    @property
    def m(self) -> int:
        return len(self._edges)

    @property
    def edges(self) -> tuple[tuple[int, int, Fraction], ...]:
        return self._edges

    @property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        return self._adjacency

    def endpoints(self, e: int) -> tuple[int, int]:
        u, v, _ = self._edges[e]
        return u, v

    def weight(self, e: int) -> Fraction:
        return self._edges[e][2]

    def incident(self, v: int) -> tuple[int, ...]:
        return self._adjacency[v]

    def other(self, e: int, v: int) -> int:
        u, w, _ = self._edges[e]
        if v == u:
            return w
        if v == w:
            return u
        raise ValueError(f"Vertex {v} is not an endpoint of edge {e}")

    def all_edges(self) -> frozenset[int]:
        return frozenset(range(self.m))

    def weight_of(self, edge_set: Iterable[int]) -> Fraction:
        return sum((self._edges[e][2] for e in edge_set), Fraction(0))

    def degrees(self, edge_set: Iterable[int]) -> list[int]:
        degree = [0] * self._n
        for e in edge_set:
            u, v, _ = self._edges[e]
            degree[u] += 1
            degree[v] += 1
        return degree

    def max_degree(self, edge_set: Iterable[int]) -> int:
        return max(self.degrees(edge_set), default=0)

    def touched(self, edge_set: Iterable[int]) -> set[int]:
        vertices: set[int] = set()
        for e in edge_set:
            u, v, _ = self._edges[e]
            vertices.add(u)
            vertices.add(v)
        return vertices

    def hop_distances(self, edge_set: Iterable[int]) -> np.ndarray:
        """
        All-pairs unweighted hop distances within the subgraph `edge_set`.

        Unreachable pairs are `inf`; the diagonal is 0.
        """
        if self._n == 0:
            return np.zeros((0, 0))
        rows: list[int] = []
        cols: list[int] = []
        for e in edge_set:
            u, v, _ = self._edges[e]
            rows.append(u)
            cols.append(v)
        matrix = csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(self._n, self._n)
        )
        return np.asarray(
            shortest_path(matrix, directed=False, unweighted=True)
        )

    def check_adjacency(self) -> bool:
        """
        Round-trip check of the adjacency lists against the edge list.
        """
        for v, incident in enumerate(self._adjacency):
            for e in incident:
                if v not in self.endpoints(e):
                    return False
        return sum(len(a) for a in self._adjacency) == 2 * self.m

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self._n}, m={self.m})"


class Realization:
    """
    A sampled subset of edge indices, plus the seed that produced it.
    """

    def __init__(
        self, graph: WeightedGraph, realized: Iterable[int], seed: int
    ) -> None:
        realized = frozenset(realized)
        for e in realized:
            if not 0 <= e < graph.m:
                raise ValueError(f"Realized edge {e} is not an edge index")
        self.graph = graph
        self.realized = realized
        self.seed = seed

    def __contains__(self, e: int) -> bool:
        return e in self.realized

    def __len__(self) -> int:
        return len(self.realized)


class Matching:
    """
    A vertex-disjoint set of edge indices with its exact weight.
    """

    def __init__(self, graph: WeightedGraph, edges: Iterable[int]) -> None:
        edges = frozenset(edges)
        covered: set[int] = set()
        for e in sorted(edges):
            u, v = graph.endpoints(e)
            if u in covered or v in covered:
                raise ValueError(f"Edge {e} shares a vertex with another edge")
            covered.add(u)
            covered.add(v)
        self.edges = edges
        self.weight = graph.weight_of(edges)
        self.vertices = frozenset(covered)

    def __contains__(self, e: int) -> bool:
        return e in self.edges

    def __len__(self) -> int:
        return len(self.edges)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Matching):
            return NotImplemented
        return self.edges == other.edges

    def __hash__(self) -> int:
        return hash(self.edges)

    def __repr__(self) -> str:
        return f"Matching({sorted(self.edges)}, weight={self.weight})"


def is_matching(graph: WeightedGraph, edges: Iterable[int]) -> bool:
    covered: set[int] = set()
    for e in edges:
        u, v = graph.endpoints(e)
        if u in covered or v in covered:
            return False
        covered.add(u)
        covered.add(v)
    return True


def sample_edges(
    candidates: Iterable[int], p: Probability, seed: int
) -> frozenset[int]:
    """
    Keeps each candidate edge independently with probability `p`.

    Candidates are visited in ascending order, so the result is a pure
    function of (candidates, p, seed).
    """
    ordered = sorted(candidates)
    if p <= 0 or not ordered:
        return frozenset()
    if p >= 1:
        return frozenset(ordered)
    draws = generator_from_seed(seed).random(len(ordered))
    return frozenset(e for e, u in zip(ordered, draws) if u < float(p))


def sample_realization(
    g: WeightedGraph, p: Probability, rng: RngStream
) -> Realization:
    if not 0 <= p <= 1:
        raise ValueError(f"Probability must lie in [0, 1]: {p}")
    return realization_from_seed(g, p, rng.seed)


def realization_from_seed(
    g: WeightedGraph, p: Probability, seed: int
) -> Realization:
    return Realization(g, sample_edges(range(g.m), p, seed), seed)


def parse_weight(text: str, denominator: Optional[int] = None) -> Fraction:
    """
    Parses a decimal (or a/b) weight as an exact rational.

    With `denominator`, the weight is rounded to the nearest multiple of
    1/denominator.
    """
    try:
        weight = Fraction(text)
    except (ValueError, ZeroDivisionError) as e:
        raise ParseError(f"Invalid weight: {text!r}") from e
    if denominator is not None:
        weight = Fraction(round(weight * denominator), denominator)
    return weight


def read_graph(path: Path, denominator: Optional[int] = None) -> WeightedGraph:
    """
    Reads a graph file: `n m` on the first line, then `m` lines `u v w`.
    """
    logging.debug(f"Reading graph {path}...")
    lines = [
        line.split()
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip() != ""
    ]
    if len(lines) == 0 or len(lines[0]) != 2:
        raise ParseError(f"{path}: first line must be 'n m'")
    try:
        n, m = int(lines[0][0]), int(lines[0][1])
    except ValueError as e:
        raise ParseError(f"{path}: first line must be 'n m'") from e
    if len(lines) - 1 != m:
        raise ParseError(f"{path}: expected {m} edge lines, found {len(lines) - 1}")

    edges: list[tuple[int, int, Fraction]] = []
    for number, fields in enumerate(lines[1:], start=2):
        if len(fields) != 3:
            raise ParseError(f"{path}:{number}: expected 'u v w'")
        try:
            u, v = int(fields[0]), int(fields[1])
        except ValueError as e:
            raise ParseError(f"{path}:{number}: invalid vertex id") from e
        edges.append((u, v, parse_weight(fields[2], denominator)))

    try:
        return WeightedGraph(n, edges)
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from e


def write_graph(g: WeightedGraph, path: Path) -> None:
    lines = [f"{g.n} {g.m}"]
    for u, v, w in g.edges:
        text = str(w.numerator) if w.denominator == 1 else str(w)
        lines.append(f"{u} {v} {text}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _weights(
    count: int, rng: RngStream, w: Optional[Fraction], wmin: int, wmax: int
) -> list[Fraction]:
    if w is not None:
        return [Fraction(w)] * count
    draws = rng.generator().integers(wmin, wmax + 1, size=count)
    return [Fraction(int(x)) for x in draws]


def erdos_renyi(
    n: int,
    m: int,
    rng: RngStream,
    wmin: int = 1,
    wmax: int = 10,
    w: Optional[Fraction] = None,
) -> WeightedGraph:
    """
    A uniformly random simple graph with `n` vertices and `m` edges, with
    integer weights drawn uniformly from [wmin, wmax].
    """
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    if m > len(pairs):
        raise ValueError(f"A simple graph on {n} vertices has at most {len(pairs)} edges")
    chosen = (
        sorted(rng.child(0).generator().choice(len(pairs), size=m, replace=False))
        if m > 0
        else []
    )
    weights = _weights(m, rng.child(1), w, wmin, wmax)
    return WeightedGraph(
        n, [(*pairs[i], weight) for i, weight in zip(chosen, weights)]
    )


def path_graph(
    n: int,
    rng: RngStream,
    wmin: int = 1,
    wmax: int = 10,
    w: Optional[Fraction] = None,
) -> WeightedGraph:
    weights = _weights(max(0, n - 1), rng, w, wmin, wmax)
    return WeightedGraph(n, [(i, i + 1, weights[i]) for i in range(n - 1)])


def cycle_graph(
    n: int,
    rng: RngStream,
    wmin: int = 1,
    wmax: int = 10,
    w: Optional[Fraction] = None,
) -> WeightedGraph:
    if n < 3:
        raise ValueError(f"A simple cycle needs at least 3 vertices: {n}")
    weights = _weights(n, rng, w, wmin, wmax)
    return WeightedGraph(n, [(i, (i + 1) % n, weights[i]) for i in range(n)])


def clique_graph(
    n: int,
    rng: RngStream,
    wmin: int = 1,
    wmax: int = 10,
    w: Optional[Fraction] = None,
) -> WeightedGraph:
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    weights = _weights(len(pairs), rng, w, wmin, wmax)
    return WeightedGraph(
        n, [(u, v, weight) for (u, v), weight in zip(pairs, weights)]
    )
