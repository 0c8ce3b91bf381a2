"""Hamiltonian data model, dual interaction graph and greedy coloring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .pauli import PauliError, PauliString


class SpecParseError(ValueError):
    """Malformed spec document; carries the offending line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Term:
    term_id: str
    operator: PauliString
    coefficient: float


@dataclass(frozen=True)
class HamiltonianSpec:
    """Pauli-term Hamiltonian ``H = sum_a coefficient_a * E_a`` with an inverse temperature.

    Parameters
    ----------
    n_qubits : int
    terms : tuple of Term
        Operators must be distinct and non-identity, coefficients in [-1, 1].
    beta : float
    """

    n_qubits: int
    terms: Tuple[Term, ...]
    beta: float = 1.0
    _index: Dict[str, int] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        index = {}
        seen = {}
        for i, t in enumerate(self.terms):
            if t.term_id in index:
                raise ValueError(f"duplicate term id {t.term_id!r}")
            if t.operator.n_qubits != self.n_qubits:
                raise ValueError(f"term {t.term_id!r} acts on the wrong register")
            if t.operator.is_identity():
                raise ValueError(f"term {t.term_id!r} is the identity")
            key = (t.operator.x, t.operator.z)
            if key in seen:
                raise ValueError(f"terms {seen[key]!r} and {t.term_id!r} share an operator")
            if not math.isfinite(t.coefficient) or abs(t.coefficient) > 1:
                raise ValueError(f"coefficient of {t.term_id!r} outside [-1, 1]")
            seen[key] = t.term_id
            index[t.term_id] = i
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ValueError("beta must be a non-negative finite number")
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_terms(cls, n_qubits: int, terms: Sequence[tuple], beta: float = 1.0) -> "HamiltonianSpec":
        """Build from ``(term_id, tokens, coefficient)`` triples."""
        built = []
        for tid, tokens, coef in terms:
            op = tokens if isinstance(tokens, PauliString) else PauliString.from_tokens(tokens, n_qubits)
            built.append(Term(str(tid), op, float(coef)))
        return cls(n_qubits, tuple(built), float(beta))

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def term_ids(self) -> List[str]:
        return [t.term_id for t in self.terms]

    @property
    def operators(self) -> List[PauliString]:
        return [t.operator for t in self.terms]

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([t.coefficient for t in self.terms], dtype=float)

    def index(self, term_id: str) -> int:
        try:
            return self._index[term_id]
        except KeyError:
            raise KeyError(f"unknown term id {term_id!r}") from None

    def operator(self, term_id: str) -> PauliString:
        return self.terms[self.index(term_id)].operator

    def with_coefficients(self, coefficients) -> "HamiltonianSpec":
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (self.n_terms,):
            raise ValueError("coefficient vector has the wrong length")
        terms = tuple(replace(t, coefficient=float(c)) for t, c in zip(self.terms, coefficients))
        return HamiltonianSpec(self.n_qubits, terms, self.beta)

    def with_beta(self, beta: float) -> "HamiltonianSpec":
        return HamiltonianSpec(self.n_qubits, self.terms, float(beta))

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for t in self.terms:
            out += t.coefficient * t.operator.to_matrix()
        return out


def parse_hamiltonian(text: str) -> HamiltonianSpec:
    """Parse the line-oriented spec format.

    ``qubits <N>`` and ``beta <B>`` headers, then ``term <id> <coeff> <tokens>``
    lines; ``#`` starts a comment.
    """
    n_qubits = None
    beta = None
    raw_terms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0].lower()
        if key == "qubits":
            if len(parts) != 2 or not parts[1].isdigit():
                raise SpecParseError("expected 'qubits <N>'", lineno)
            n_qubits = int(parts[1])
        elif key == "beta":
            if len(parts) != 2:
                raise SpecParseError("expected 'beta <value>'", lineno)
            try:
                beta = float(parts[1])
            except ValueError:
                raise SpecParseError(f"bad beta {parts[1]!r}", lineno) from None
            if not (math.isfinite(beta) and beta >= 0):
                raise SpecParseError("beta must be non-negative", lineno)
        elif key == "term":
            if len(parts) < 4:
                raise SpecParseError("expected 'term <id> <coeff> <tokens...>'", lineno)
            try:
                coef = float(parts[2])
            except ValueError:
                raise SpecParseError(f"bad coefficient {parts[2]!r}", lineno) from None
            if not math.isfinite(coef) or abs(coef) > 1:
                raise SpecParseError(f"coefficient {parts[2]} outside [-1, 1]", lineno)
            raw_terms.append((lineno, parts[1], coef, parts[3:]))
        else:
            raise SpecParseError(f"unknown directive {parts[0]!r}", lineno)
    if n_qubits is None:
        raise SpecParseError("missing 'qubits' line")
    if beta is None:
        raise SpecParseError("missing 'beta' line")
    terms = []
    seen_ops: Dict[Tuple[int, int], str] = {}
    seen_ids = set()
    for lineno, tid, coef, tokens in raw_terms:
        try:
            op = PauliString.from_tokens(tokens, n_qubits)
        except PauliError as exc:
            raise SpecParseError(str(exc), lineno) from None
        if tid in seen_ids:
            raise SpecParseError(f"duplicate term id {tid!r}", lineno)
        key = (op.x, op.z)
        if key in seen_ops:
            raise SpecParseError(f"duplicate term: same operator as {seen_ops[key]!r}", lineno)
        seen_ids.add(tid)
        seen_ops[key] = tid
        terms.append(Term(tid, op, coef))
    return HamiltonianSpec(n_qubits, tuple(terms), beta)


def format_hamiltonian(h: HamiltonianSpec) -> str:
    lines = [f"qubits {h.n_qubits}", f"beta {h.beta!r}"]
    for t in h.terms:
        lines.append(f"term {t.term_id} {t.coefficient!r} {t.operator.to_tokens()}")
    return "\n".join(lines) + "\n"


class DualGraph:
    """Undirected graph on term ids with sorted adjacency lists.

    Nodes carry an internal index given by insertion order; neighbor lists are
    sorted by that index.
    """

    def __init__(self, nodes: Sequence[Hashable], adjacency: Mapping[Hashable, Sequence[Hashable]],
                 max_support: int = 0):
        self.nodes = list(nodes)
        self.index = {v: i for i, v in enumerate(self.nodes)}
        if len(self.index) != len(self.nodes):
            raise ValueError("duplicate node labels")
        nbrs = [set() for _ in self.nodes]
        for v, adj in adjacency.items():
            i = self.index[v]
            for u in adj:
                j = self.index[u]
                if i != j:
                    nbrs[i].add(j)
                    nbrs[j].add(i)
        self.adj = [tuple(sorted(s)) for s in nbrs]
        self.max_degree = max((len(a) for a in self.adj), default=0)
        self.max_support = max_support

    @classmethod
    def from_edges(cls, nodes: Sequence[Hashable], edges: Sequence[tuple]) -> "DualGraph":
        adjacency: Dict[Hashable, list] = {v: [] for v in nodes}
        for a, b in edges:
            adjacency[a].append(b)
        return cls(nodes, adjacency)

    def __len__(self) -> int:
        return len(self.nodes)

    def neighbors(self, node: Hashable) -> List[Hashable]:
        return [self.nodes[j] for j in self.adj[self.index[node]]]

    def edges(self) -> List[tuple]:
        return [(self.nodes[i], self.nodes[j]) for i, a in enumerate(self.adj) for j in a if i < j]

    def distances_from(self, node: Hashable) -> Dict[Hashable, int]:
        """Breadth-first hop distances from ``node`` to every reachable node."""
        start = self.index[node]
        dist = {start: 0}
        frontier = [start]
        while frontier:
            nxt = []
            for i in frontier:
                for j in self.adj[i]:
                    if j not in dist:
                        dist[j] = dist[i] + 1
                        nxt.append(j)
            frontier = nxt
        return {self.nodes[i]: d for i, d in dist.items()}


def build_dual_graph(h: HamiltonianSpec) -> DualGraph:
    """Join two terms iff their supports share a qubit.

    Per-qubit term lists are collected first; each term's neighbor list is the
    merged, de-duplicated union of the lists of the qubits it touches.
    """
    per_qubit: List[List[int]] = [[] for _ in range(h.n_qubits)]
    for i, t in enumerate(h.terms):
        for q in t.operator.support:
            per_qubit[q].append(i)
    adjacency = {}
    for i, t in enumerate(h.terms):
        merged = sorted({j for q in t.operator.support for j in per_qubit[q] if j != i})
        adjacency[t.term_id] = [h.terms[j].term_id for j in merged]
    max_support = max((t.operator.weight for t in h.terms), default=0)
    return DualGraph(h.term_ids, adjacency, max_support=max_support)


@dataclass(frozen=True)
class Coloring:
    colors: Dict[Hashable, int]
    color_count: int

    def classes(self) -> List[List[Hashable]]:
        out: List[List[Hashable]] = [[] for _ in range(self.color_count)]
        for v, c in self.colors.items():
            out[c].append(v)
        return out


def greedy_coloring(g: DualGraph) -> Coloring:
    """Give each node, in index order, the smallest color unused by its neighbors."""
    color = [-1] * len(g)
    for i in range(len(g)):
        taken = {color[j] for j in g.adj[i] if color[j] >= 0}
        c = 0
        while c in taken:
            c += 1
        color[i] = c
    count = max(color) + 1 if color else 0
    return Coloring({g.nodes[i]: c for i, c in enumerate(color)}, count)
