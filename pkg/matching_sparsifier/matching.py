import math

from fractions import Fraction
from functools import lru_cache
from typing import Iterable

from matching_sparsifier.graph import Matching, WeightedGraph, is_matching
from matching_sparsifier.misc import CapExceeded


SOLVER_VERTEX_CAP = 22
BRUTEFORCE_EDGE_CAP = 16


def prefers(
    weight_a: Fraction | int, key_a: int, weight_b: Fraction | int, key_b: int
) -> bool:
    """
    Canonical order on matchings: heavier wins; among equal weights, the set
    holding the smallest edge index the two sets disagree on wins.

    Keys are bitmasks over edge indices. For equal-size sets this is the
    lexicographic order of the sorted index sequences. Sets of different
    sizes can only tie through zero-weight edges, and there the lowest
    differing bit decides: {0, 1} beats {0} when edge 1 weighs 0.
    """
    if weight_a != weight_b:
        return weight_a > weight_b
    diff = key_a ^ key_b
    if diff == 0:
        return False
    return bool(key_a & (diff & -diff))


def mwm(g: WeightedGraph, active: Iterable[int]) -> Matching:
    """
    The canonical maximum-weight matching among the `active` edges.

    Exact dynamic programming over subsets of the touched vertices; raises
    `CapExceeded` above `SOLVER_VERTEX_CAP` touched vertices.
    """
    active = frozenset(active)
    for e in active:
        if not 0 <= e < g.m:
            raise ValueError(f"Active edge {e} is not an edge index")
    return _solve(g, active)


@lru_cache(maxsize=65536)
def _solve(g: WeightedGraph, active: frozenset[int]) -> Matching:
    if len(active) == 0:
        return Matching(g, ())

    vertices = sorted(g.touched(active))
    if len(vertices) > SOLVER_VERTEX_CAP:
        raise CapExceeded(
            f"{len(vertices)} touched vertices exceed the exact solver cap "
            f"of {SOLVER_VERTEX_CAP}"
        )

    # Breadth-first labels keep each component contiguous, which keeps the
    # number of reachable subsets small on sparse graphs.
    incident: dict[int, list[int]] = {v: [] for v in vertices}
    for e in sorted(active):
        u, v = g.endpoints(e)
        incident[u].append(e)
        incident[v].append(e)
    label: dict[int, int] = {}
    for root in vertices:
        if root in label:
            continue
        label[root] = len(label)
        queue = [root]
        while queue:
            x = queue.pop(0)
            for e in incident[x]:
                y = g.other(e, x)
                if y not in label:
                    label[y] = len(label)
                    queue.append(y)

    scale = math.lcm(*(g.weight(e).denominator for e in active))
    neighbours: list[list[tuple[int, int, int]]] = [[] for _ in vertices]
    for e in sorted(active):
        u, v = g.endpoints(e)
        w = int(g.weight(e) * scale)
        neighbours[label[u]].append((label[v], e, w))
        neighbours[label[v]].append((label[u], e, w))

    memo: dict[int, tuple[int, int]] = {0: (0, 0)}

    def best(mask: int) -> tuple[int, int]:
        cached = memo.get(mask)
        if cached is not None:
            return cached
        low = mask & -mask
        i = low.bit_length() - 1
        rest = mask ^ low
        result = best(rest)
        for j, e, w in neighbours[i]:
            bit = 1 << j
            if rest & bit:
                sub_weight, sub_key = best(rest ^ bit)
                weight, key = sub_weight + w, sub_key | (1 << e)
                if prefers(weight, key, result[0], result[1]):
                    result = (weight, key)
        memo[mask] = result
        return result

    _, key = best((1 << len(vertices)) - 1)
    return Matching(g, [e for e in active if (key >> e) & 1])


def mwm_bruteforce(g: WeightedGraph, active: Iterable[int]) -> Matching:
    """
    Exhaustive maximum-weight matching over all subsets of `active`, using
    the same canonical order as `mwm`. Test oracle only.
    """
    edges = sorted(frozenset(active))
    if len(edges) > BRUTEFORCE_EDGE_CAP:
        raise CapExceeded(
            f"{len(edges)} active edges exceed the brute-force cap of "
            f"{BRUTEFORCE_EDGE_CAP}"
        )

    best_weight, best_key = Fraction(0), 0
    for subset in range(1 << len(edges)):
        chosen = [edges[i] for i in range(len(edges)) if (subset >> i) & 1]
        if not is_matching(g, chosen):
            continue
        weight = g.weight_of(chosen)
        key = sum(1 << e for e in chosen)
        if prefers(weight, key, best_weight, best_key):
            best_weight, best_key = weight, key

    return Matching(g, [e for e in edges if (best_key >> e) & 1])
