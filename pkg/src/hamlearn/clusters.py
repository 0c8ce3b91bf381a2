"""Connected clusters: multisets of graph nodes whose support is connected."""

from __future__ import annotations

import math
from functools import lru_cache
from fractions import Fraction
from itertools import combinations
from typing import Dict, Hashable, Iterable, Iterator, List, Sequence, Tuple

from .hamiltonian import DualGraph


class Cluster:
    """Multiset of nodes with positive multiplicities.

    Equality and hashing ignore the order in which items were given.
    """

    __slots__ = ("items", "_key")

    def __init__(self, items: Iterable[Tuple[Hashable, int]]):
        merged: Dict[Hashable, int] = {}
        for label, mult in items:
            if mult <= 0:
                raise ValueError("multiplicities must be positive")
            merged[label] = merged.get(label, 0) + int(mult)
        self.items = tuple(merged.items())
        self._key = frozenset(self.items)

    @classmethod
    def from_counts(cls, counts: Dict[Hashable, int]) -> "Cluster":
        return cls(counts.items())

    @property
    def weight(self) -> int:
        return sum(m for _, m in self.items)

    @property
    def support(self) -> Tuple[Hashable, ...]:
        return tuple(label for label, _ in self.items)

    @property
    def multiplicities(self) -> Dict[Hashable, int]:
        return dict(self.items)

    def multiplicity(self, label: Hashable) -> int:
        return dict(self.items).get(label, 0)

    def factorial(self) -> int:
        """``prod_a mu(a)!`` as an exact integer."""
        out = 1
        for _, m in self.items:
            out *= math.factorial(m)
        return out

    def is_connected(self, g: DualGraph) -> bool:
        support = {g.index[v] for v in self.support}
        if not support:
            return False
        start = next(iter(support))
        seen = {start}
        stack = [start]
        while stack:
            i = stack.pop()
            for j in g.adj[i]:
                if j in support and j not in seen:
                    seen.add(j)
                    stack.append(j)
        return seen == support

    def __eq__(self, other):
        return isinstance(other, Cluster) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __len__(self):
        return len(self.items)

    def __repr__(self):
        body = ", ".join(f"({a!r},{m})" for a, m in self.items)
        return f"Cluster({{{body}}})"


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """Positive integer vectors of length ``parts`` summing to ``total``, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _layer_choices(size: int, budget: int) -> Tuple[Tuple[Tuple[int, ...], Tuple[int, ...]], ...]:
    """Nonempty multisets over positions ``0..size-1`` of weight at most ``budget``.

    Ordered lexicographically by (support, multiplicity vector).
    """
    out = []
    for k in range(1, min(size, budget) + 1):
        for support in combinations(range(size), k):
            for w in range(k, budget + 1):
                for mults in _compositions(w, k):
                    out.append((support, mults))
    out.sort()
    return tuple(out)


def enumerate_clusters(g: DualGraph, root: Hashable, weight: int) -> List[Cluster]:
    """All connected clusters of total weight ``weight`` whose support contains ``root``.

    A cluster is built layer by layer: layer ``i`` holds the support nodes at
    hop distance ``i`` from the root inside the cluster's own induced subgraph.
    Frontier nodes left out of a layer are forbidden afterwards, which makes
    the layering, and hence the emitted cluster, unique.
    """
    if weight < 1:
        raise ValueError("weight must be at least 1")
    if root not in g.index:
        raise KeyError(f"unknown root {root!r}")
    r = g.index[root]
    adj = g.adj
    labels = g.nodes
    found: List[Cluster] = []

    def grow(frontier, forbidden, remaining, acc):
        if remaining == 0:
            found.append(Cluster((labels[i], m) for i, m in acc))
            return
        if not frontier:
            return
        blocked = forbidden | set(frontier)
        for positions, mults in _layer_choices(len(frontier), remaining):
            support = [frontier[p] for p in positions]
            nxt = sorted({j for i in support for j in adj[i] if j not in blocked})
            grow(nxt, blocked, remaining - sum(mults), acc + list(zip(support, mults)))

    for mu in range(1, weight + 1):
        grow(list(adj[r]), {r}, weight - mu, [(r, mu)])
    return found


def rooted_subtree_count(degree: int, n: int) -> int:
    """Number of ``n``-node subtrees containing the root of the infinite ``degree``-regular tree."""
    if n < 1:
        return 0
    if n == 1:
        return 1
    if degree == 0:
        return 0
    value = Fraction(math.comb(n * (degree - 1) + 1, n - 1) * degree, n * (degree - 1) + 1)
    if value.denominator != 1:
        raise ArithmeticError("subtree count is not an integer")
    return int(value)


def tree_cluster_count(degree: int, weight: int) -> int:
    """Exact number of weight-``weight`` connected clusters containing the root of the regular tree."""
    if degree < 1 or weight < 1:
        raise ValueError("degree and weight must be positive")
    return sum(rooted_subtree_count(degree, k) * math.comb(weight - 1, k - 1) for k in range(1, weight + 1))


def cluster_count_bound(degree: int, weight: int) -> float:
    """Upper bound on connected clusters of a given weight containing a fixed node."""
    if degree >= 2:
        return math.e * degree * (1 + math.e * (degree - 1)) ** (weight - 1)
    if degree == 1:
        return float(weight)
    return 1.0


def regular_tree(degree: int, depth: int) -> DualGraph:
    """The ``degree``-regular tree around node 0, cut off ``depth`` hops from it."""
    edges = []
    layer = [0]
    count = 1
    for d in range(depth):
        nxt = []
        for v in layer:
            children = degree if v == 0 else degree - 1
            for _ in range(children):
                edges.append((v, count))
                nxt.append(count)
                count += 1
        layer = nxt
    return DualGraph.from_edges(list(range(count)), edges)
