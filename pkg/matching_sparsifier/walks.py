from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

from matching_sparsifier.graph import WeightedGraph, is_matching
from matching_sparsifier.misc import InvalidWalk


Element = tuple[int, int]


class ProfileEntry:
    """
    One (subgraph, matching) pair of a profile.
    """

    def __init__(self, subgraph: Iterable[int], matching: Iterable[int]) -> None:
        self.subgraph = frozenset(subgraph)
        self.matching = frozenset(matching)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProfileEntry):
            return NotImplemented
        return self.subgraph == other.subgraph and self.matching == other.matching

    def __hash__(self) -> int:
        return hash((self.subgraph, self.matching))

    def __repr__(self) -> str:
        return f"ProfileEntry({sorted(self.subgraph)}, {sorted(self.matching)})"


class Profile:
    """
    α realizations of the crucial graph, each with a matching of itself.

    Entry 0 is the caller's realization.
    """

    def __init__(self, graph: WeightedGraph, entries: Sequence[ProfileEntry]) -> None:
        for i, entry in enumerate(entries):
            if not entry.matching <= entry.subgraph:
                raise ValueError(f"Matching {i} is not inside its subgraph")
            if not is_matching(graph, entry.matching):
                raise ValueError(f"Matching {i} is not a matching")
        self.graph = graph
        self.entries = tuple(entries)

    @property
    def alpha(self) -> int:
        return len(self.entries)

    def matching(self, i: int) -> frozenset[int]:
        return self.entries[i].matching

    def subgraph(self, i: int) -> frozenset[int]:
        return self.entries[i].subgraph

    def total_weight(self) -> Fraction:
        return sum(
            (self.graph.weight_of(entry.matching) for entry in self.entries),
            Fraction(0),
        )

    def matched_count(self, v: int) -> int:
        """
        The number of entries whose matching covers `v`.
        """
        return sum(
            1
            for entry in self.entries
            if any(e in entry.matching for e in self.graph.incident(v))
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Profile):
            return NotImplemented
        return self.graph is other.graph and self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)


class MultiWalk:
    """
    A walk in the base graph whose edges are tagged with profile entries.
    """

    def __init__(self, elements: Iterable[Element] = ()) -> None:
        self.elements: tuple[Element, ...] = tuple(
            (int(s), int(e)) for s, e in elements
        )

    @property
    def edges(self) -> list[int]:
        return [e for _, e in self.elements]

    def reversed(self) -> "MultiWalk":
        return MultiWalk(reversed(self.elements))

    def key(self) -> tuple[Element, ...]:
        """
        Identifies a walk up to reversal.
        """
        backwards = tuple(reversed(self.elements))
        return min(self.elements, backwards)

    def vertices(self, g: WeightedGraph) -> frozenset[int]:
        return frozenset(g.touched(self.edges))

    def __add__(self, other: "MultiWalk") -> "MultiWalk":
        return MultiWalk(self.elements + other.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[Element]:
        return iter(self.elements)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiWalk):
            return NotImplemented
        return self.elements == other.elements

    def __hash__(self) -> int:
        return hash(self.elements)

    def __repr__(self) -> str:
        return f"MultiWalk({list(self.elements)})"


def walk_vertices(g: WeightedGraph, edges: Sequence[int]) -> Optional[list[int]]:
    """
    The vertex sequence u_1 … u_{k+1} with e_i = (u_i, u_{i+1}), or None
    when `edges` is not a walk.

    Both orientations of the first edge are tried; after that the walk is
    forced. An empty sequence is the empty walk.
    """
    if len(edges) == 0:
        return []
    u, v = g.endpoints(edges[0])
    for start, current in ((u, v), (v, u)):
        sequence = [start, current]
        for e in edges[1:]:
            a, b = g.endpoints(e)
            if current == a:
                current = b
            elif current == b:
                current = a
            else:
                break
            sequence.append(current)
        else:
            return sequence
    return None


def is_multiwalk(w: MultiWalk, prof: Profile) -> bool:
    """
    Entry indices in range, each edge in its entry's subgraph, distinct
    elements, and the edges form a walk.
    """
    if len(set(w.elements)) != len(w):
        return False
    for s, e in w:
        if not 0 <= s < prof.alpha or e not in prof.subgraph(s):
            return False
    return walk_vertices(prof.graph, w.edges) is not None


def _applied_matchings(prof: Profile, w: MultiWalk) -> list[frozenset[int]]:
    toggled: list[set[int]] = [set() for _ in range(prof.alpha)]
    for s, e in w:
        toggled[s].add(e)
    return [prof.matching(i) ^ toggled[i] for i in range(prof.alpha)]


def _alternates(w: MultiWalk, prof: Profile) -> bool:
    indicators = [e in prof.matching(s) for s, e in w]
    return all(a != b for a, b in zip(indicators, indicators[1:]))


def is_alternating(w: MultiWalk, prof: Profile) -> bool:
    if not is_multiwalk(w, prof) or not _alternates(w, prof):
        return False
    return all(
        is_matching(prof.graph, matching) for matching in _applied_matchings(prof, w)
    )


def walk_degrees(w: MultiWalk, prof: Profile, v: int) -> tuple[int, int]:
    """
    (d, d̄): how many elements of `w` touch `v` with an edge inside,
    respectively outside, its entry's matching.
    """
    d, d_bar = 0, 0
    for s, e in w:
        if v not in prof.graph.endpoints(e):
            continue
        if e in prof.matching(s):
            d += 1
        else:
            d_bar += 1
    return d, d_bar


def is_applicable(w: MultiWalk, prof: Profile, saturated: Iterable[int]) -> bool:
    if not is_alternating(w, prof):
        return False
    for v in w.vertices(prof.graph) & frozenset(saturated):
        d, d_bar = walk_degrees(w, prof, v)
        if d < d_bar:
            return False
    return True


def gain(w: MultiWalk, prof: Profile) -> Fraction:
    total = Fraction(0)
    for s, e in w:
        if e in prof.matching(s):
            total -= prof.graph.weight(e)
        else:
            total += prof.graph.weight(e)
    return total


def apply_walk(prof: Profile, w: MultiWalk) -> Profile:
    if not is_alternating(w, prof):
        raise InvalidWalk(f"{w} is not an alternating multi-walk of the profile")
    matchings = _applied_matchings(prof, w)
    return Profile(
        prof.graph,
        [
            ProfileEntry(entry.subgraph, matching)
            for entry, matching in zip(prof.entries, matchings)
        ],
    )


def apply_walks(prof: Profile, walks: Iterable[MultiWalk]) -> Profile:
    for w in walks:
        prof = apply_walk(prof, w)
    return prof
