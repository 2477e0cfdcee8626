import logging

from fractions import Fraction
from typing import Iterable, Optional, Sequence

from matching_sparsifier.graph import WeightedGraph, is_matching
from matching_sparsifier.misc import InvalidWalk
from matching_sparsifier.rng import RngStream
from matching_sparsifier.walks import (
    Element,
    MultiWalk,
    Profile,
    gain,
    is_alternating,
    is_applicable,
)


class Hyperedge:
    """
    A multi-walk seen as a hyperedge on the vertices it touches.
    """

    def __init__(self, vertices: frozenset[int], gain: Fraction, walk: MultiWalk) -> None:
        self.vertices = vertices
        self.gain = gain
        self.walk = walk

    def __repr__(self) -> str:
        return f"Hyperedge({sorted(self.vertices)}, gain={self.gain})"


class GainHypergraph:
    """
    `truncated` marks an enumeration cut short by the walk cap; `dropped`
    counts pieces of H' that were not applicable and left out.
    """

    def __init__(
        self,
        hyperedges: Sequence[Hyperedge],
        truncated: bool = False,
        dropped: int = 0,
    ) -> None:
        self.hyperedges = list(hyperedges)
        self.truncated = truncated
        self.dropped = dropped

    @staticmethod
    def from_walks(prof: Profile, walks: Iterable[MultiWalk]) -> "GainHypergraph":
        return GainHypergraph(
            [Hyperedge(w.vertices(prof.graph), gain(w, prof), w) for w in walks]
        )

    def positive(self) -> list[int]:
        return [i for i, h in enumerate(self.hyperedges) if h.gain > 0]

    def rank(self, indices: Optional[Iterable[int]] = None) -> int:
        chosen = range(len(self.hyperedges)) if indices is None else indices
        return max((len(self.hyperedges[i].vertices) for i in chosen), default=0)

    def degrees(self, indices: Optional[Iterable[int]] = None) -> dict[int, int]:
        chosen = range(len(self.hyperedges)) if indices is None else indices
        degree: dict[int, int] = {}
        for i in chosen:
            for v in self.hyperedges[i].vertices:
                degree[v] = degree.get(v, 0) + 1
        return degree

    def max_degree(self, indices: Optional[Iterable[int]] = None) -> int:
        return max(self.degrees(indices).values(), default=0)

    def total_positive_gain(self) -> Fraction:
        return sum(
            (h.gain for h in self.hyperedges if h.gain > 0), Fraction(0)
        )

    def gain_of(self, indices: Iterable[int]) -> Fraction:
        return sum((self.hyperedges[i].gain for i in indices), Fraction(0))

    def keys(self) -> set[tuple[Element, ...]]:
        return {h.walk.key() for h in self.hyperedges}

    def __len__(self) -> int:
        return len(self.hyperedges)


class _WalkCapReached(Exception):
    pass


def build_H(
    prof: Profile, saturated: Iterable[int], l: int, walk_cap: int
) -> GainHypergraph:
    """
    Every alternating multi-walk of length at most `l` that is applicable
    with respect to `saturated`, one hyperedge per walk up to reversal.

    Walks are grown depth-first from each (entry, edge) start in both
    directions. Application validity and applicability are not closed under
    prefixes, so only length, continuity, distinctness and alternation prune
    the search. Enumeration stops at `walk_cap` stored walks.
    """
    if l < 1:
        raise ValueError(f"Walk length bound must be positive: {l}")
    g = prof.graph
    saturated = frozenset(saturated)

    at_vertex: dict[int, list[Element]] = {}
    for s in range(prof.alpha):
        for e in sorted(prof.subgraph(s)):
            for v in g.endpoints(e):
                at_vertex.setdefault(v, []).append((s, e))
    for elements in at_vertex.values():
        elements.sort()

    seen: set[tuple[Element, ...]] = set()
    hyperedges: list[Hyperedge] = []

    def visit(path: list[Element], end: int) -> None:
        w = MultiWalk(path)
        key = w.key()
        if key not in seen and is_applicable(w, prof, saturated):
            seen.add(key)
            hyperedges.append(Hyperedge(w.vertices(g), gain(w, prof), w))
            if len(hyperedges) >= walk_cap:
                raise _WalkCapReached()
        if len(path) == l:
            return
        last_s, last_e = path[-1]
        last_matched = last_e in prof.matching(last_s)
        for s, e in at_vertex.get(end, []):
            if (s, e) in path or (e in prof.matching(s)) == last_matched:
                continue
            path.append((s, e))
            visit(path, g.other(e, end))
            path.pop()

    truncated = False
    try:
        for s in range(prof.alpha):
            for e in sorted(prof.subgraph(s)):
                u, v = g.endpoints(e)
                visit([(s, e)], v)
                visit([(s, e)], u)
    except _WalkCapReached:
        truncated = True
        logging.warning(f"Walk enumeration truncated at {walk_cap} walks")

    return GainHypergraph(hyperedges, truncated)


def greedy_hypergraph_matching(H: GainHypergraph) -> list[int]:
    """
    Repeatedly takes the heaviest remaining hyperedge that is disjoint from
    those taken; ties go to the lower index. Nonpositive gains are skipped.

    Returns the selected indices in ascending order.
    """
    order = sorted(H.positive(), key=lambda i: (-H.hyperedges[i].gain, i))
    covered: set[int] = set()
    selected: list[int] = []
    for i in order:
        vertices = H.hyperedges[i].vertices
        if covered.isdisjoint(vertices):
            selected.append(i)
            covered |= vertices
    return sorted(selected)


def _components(g: WeightedGraph, edges: set[int]) -> list[tuple[list[int], bool]]:
    """
    Splits a graph of maximum degree two into its paths and cycles, each as
    an edge sequence in walk order plus a cycle flag. Components are listed
    by smallest edge index.
    """
    incident: dict[int, list[int]] = {}
    for e in sorted(edges):
        for v in g.endpoints(e):
            incident.setdefault(v, []).append(e)

    components: list[tuple[list[int], bool]] = []
    assigned: set[int] = set()
    for first in sorted(edges):
        if first in assigned:
            continue
        # Collect the component's edges.
        members: set[int] = set()
        stack = [first]
        while stack:
            e = stack.pop()
            if e in members:
                continue
            members.add(e)
            for v in g.endpoints(e):
                stack.extend(x for x in incident[v] if x not in members)
        assigned |= members

        vertices = g.touched(members)
        ends = sorted(v for v in vertices if len(incident[v]) == 1)
        is_cycle = len(ends) == 0
        if is_cycle:
            start_edge = min(members)
            current = min(g.endpoints(start_edge))
        else:
            current = ends[0]
            start_edge = incident[current][0]

        sequence: list[int] = []
        e = start_edge
        while True:
            sequence.append(e)
            current = g.other(e, current)
            following = [x for x in incident[current] if x != e and x not in sequence]
            if not following:
                break
            e = following[0]
        components.append((sequence, is_cycle))
    return components


def _variants(sequence: list[int], is_cycle: bool) -> list[list[int]]:
    if not is_cycle:
        return [sequence, sequence[::-1]]
    variants: list[list[int]] = []
    for base in (sequence, sequence[::-1]):
        for r in range(len(base)):
            variants.append(base[r:] + base[:r])
    return variants


def _expand(
    prof: Profile, w: MultiWalk, candidates: list[MultiWalk]
) -> Optional[MultiWalk]:
    for q in candidates:
        if is_alternating(w + q, prof):
            return w + q
    for q in candidates:
        if is_alternating(q + w, prof):
            return q + w
    return None


def construct_H_prime(
    prof: Profile,
    saturated: Iterable[int],
    reference: Sequence[Iterable[int]],
    l: int,
    rng: RngStream,
    offset: Optional[int] = None,
) -> GainHypergraph:
    """
    Builds the auxiliary hypergraph H' from the symmetric differences of the
    profile's matchings M_i and the reference matchings M^A_i.

    Components of each M_i △ M^A_i are chained into multi-walks, which are
    then cut at unmatched positions congruent to x or x+1 modulo l/4; the
    first and last pieces are rejoined when they fit together. `offset`
    fixes x, otherwise it is drawn per walk from `rng`.
    """
    if l < 4 or l % 4 != 0:
        raise ValueError(f"Walk length bound must be a positive multiple of 4: {l}")
    if len(reference) != prof.alpha:
        raise ValueError("One reference matching per profile entry is required")
    g = prof.graph
    saturated = frozenset(saturated)
    period = l // 4
    if offset is not None and not 0 <= offset < period:
        raise ValueError(f"Offset must lie in [0, {period - 1}]: {offset}")

    references = [frozenset(m) for m in reference]
    for i, m in enumerate(references):
        if not m <= prof.subgraph(i) or not is_matching(g, m):
            raise ValueError(f"Reference {i} is not a matching of its subgraph")

    differences = [set(prof.matching(i) ^ references[i]) for i in range(prof.alpha)]

    def covered(edge_sets: Sequence[frozenset[int]], v: int) -> int:
        return sum(1 for m in edge_sets if any(e in m for e in g.incident(v)))

    losing = {
        v
        for v in saturated
        if covered(references, v) > covered([prof.matching(i) for i in range(prof.alpha)], v)
    }
    for i in range(prof.alpha):
        differences[i] = {
            e
            for e in differences[i]
            if not (e in references[i] and losing & set(g.endpoints(e)))
        }

    def tagged(i: int, sequence: list[int]) -> MultiWalk:
        return MultiWalk((i, e) for e in sequence)

    walks: list[MultiWalk] = []
    while any(differences):
        i = next(j for j in range(prof.alpha) if differences[j])
        sequence, _ = _components(g, differences[i])[0]
        w = tagged(i, sequence)
        assert is_alternating(w, prof), f"Component {sequence} does not alternate"
        differences[i] -= set(sequence)

        grown = True
        while grown:
            grown = False
            for j in range(prof.alpha):
                for sequence, is_cycle in _components(g, differences[j]):
                    candidates = [tagged(j, v) for v in _variants(sequence, is_cycle)]
                    expanded = _expand(prof, w, candidates)
                    if expanded is not None:
                        w = expanded
                        differences[j] -= set(sequence)
                        grown = True
                        break
                if grown:
                    break
        walks.append(w)

    pieces: list[MultiWalk] = []
    for index, w in enumerate(walks):
        if offset is not None:
            x = offset
        else:
            x = int(rng.child(index).generator().integers(0, period))

        runs: list[list[Element]] = [[]]
        for position, (s, e) in enumerate(w, start=1):
            cut = e not in prof.matching(s) and position % period in (x, (x + 1) % period)
            if cut:
                runs.append([])
            else:
                runs[-1].append((s, e))
        parts = [MultiWalk(run) for run in runs if run]

        if len(parts) >= 2:
            merged = _expand(prof, parts[0], [parts[-1]])
            if merged is not None:
                parts = [merged] + parts[1:-1]
        pieces.extend(parts)

    kept: list[MultiWalk] = []
    for piece in pieces:
        if len(piece) > l:
            raise InvalidWalk(f"Piece {piece} is longer than l = {l}")
        if not is_applicable(piece, prof, saturated):
            logging.warning(f"Dropping inapplicable piece {piece}")
            continue
        kept.append(piece)

    dropped = len(pieces) - len(kept)
    logging.debug(
        f"H' has {len(kept)} hyperedges from {len(walks)} walks, {dropped} dropped"
    )
    H = GainHypergraph.from_walks(prof, kept)
    H.dropped = dropped
    return H
