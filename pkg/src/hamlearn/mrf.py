"""Parameter learning for binary Markov random fields with known hypergraph structure.

The distribution is ``Pr[z] ~ exp(-beta * sum_S lambda_S z^S)`` over ``{-1, +1}^N``.
Conditionals of one vertex given its neighborhood are sigmoids,
``Pr[X_v = +1 | X_{N_v} = z] = sigma(-2 beta sum_{S in E_v} lambda_S z^(S - v))``,
so logits of empirical conditionals, averaged with signs over a small slice
of the cube, isolate each coefficient.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, logit, logsumexp

from .hamiltonian import SpecParseError
from .qsim import draw, stream

log = logging.getLogger(__name__)

ENUMERATION_CAP = 20


@dataclass(frozen=True)
class Hyperedge:
    edge_id: str
    vertices: Tuple[int, ...]
    coefficient: float


@dataclass(frozen=True)
class MrfSpec:
    """Hypergraph with coefficients and inverse temperature.

    Parameters
    ----------
    n_vertices : int
    edges : tuple of Hyperedge
    beta : float
    """

    n_vertices: int
    edges: Tuple[Hyperedge, ...]
    beta: float

    def __post_init__(self):
        if self.n_vertices < 1:
            raise ValueError("need at least one vertex")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        seen = set()
        for e in self.edges:
            if e.edge_id in seen:
                raise ValueError(f"duplicate edge id {e.edge_id!r}")
            seen.add(e.edge_id)
            if not e.vertices:
                raise ValueError(f"edge {e.edge_id!r} has no vertices")
            if len(set(e.vertices)) != len(e.vertices):
                raise ValueError(f"edge {e.edge_id!r} repeats a vertex")
            if min(e.vertices) < 0 or max(e.vertices) >= self.n_vertices:
                raise ValueError(f"edge {e.edge_id!r} has a vertex out of range")
            if not -1.0 <= e.coefficient <= 1.0:
                raise ValueError(f"edge {e.edge_id!r} coefficient outside [-1, 1]")

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[Tuple[str, Sequence[int], float]], beta: float) -> "MrfSpec":
        return cls(n, tuple(Hyperedge(i, tuple(int(v) for v in vs), float(c)) for i, vs, c in edges), float(beta))

    @property
    def edge_ids(self) -> Tuple[str, ...]:
        return tuple(e.edge_id for e in self.edges)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([e.coefficient for e in self.edges])

    def with_coefficients(self, values) -> "MrfSpec":
        return MrfSpec(self.n_vertices, tuple(Hyperedge(e.edge_id, e.vertices, float(c))
                                              for e, c in zip(self.edges, values)), self.beta)

    def incident(self, v: int) -> List[Hyperedge]:
        return [e for e in self.edges if v in e.vertices]

    def neighborhood(self, v: int) -> Tuple[int, ...]:
        return tuple(sorted({u for e in self.incident(v) for u in e.vertices} - {v}))

    @property
    def degree(self) -> int:
        """``d = max_v |E_v|``."""
        return max((len(self.incident(v)) for v in range(self.n_vertices)), default=0)

    @property
    def order_parameter(self) -> float:
        """``L = max_v |N_v + v| / d``."""
        d = self.degree
        if d == 0:
            return 0.0
        return max(len(self.neighborhood(v)) + 1 for v in range(self.n_vertices)) / d


@dataclass
class SampleBatch:
    samples: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.int8)
        if self.samples.ndim != 2:
            raise ValueError("samples must be a 2-d array")
        if not np.all(np.abs(self.samples) == 1):
            raise ValueError("samples must be +-1")

    @property
    def count(self) -> int:
        return self.samples.shape[0]


def parse_mrf(text: str) -> MrfSpec:
    """Parse ``vertices N``, ``beta B`` and ``edge <id> <coeff> v1 v2 ...`` lines."""
    n = beta = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "vertices" and len(parts) == 2:
                n = int(parts[1])
            elif parts[0] == "beta" and len(parts) == 2:
                beta = float(parts[1])
            elif parts[0] == "edge" and len(parts) >= 4:
                edges.append((parts[1], [int(v) for v in parts[3:]], float(parts[2])))
            else:
                raise SpecParseError(f"unrecognized line {line!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, SpecParseError):
                raise
            raise SpecParseError(str(exc), lineno) from None
    if n is None or beta is None:
        raise SpecParseError("missing 'vertices' or 'beta' line")
    try:
        return MrfSpec.from_edges(n, edges, beta)
    except ValueError as exc:
        raise SpecParseError(str(exc)) from None


def format_mrf(spec: MrfSpec) -> str:
    lines = [f"vertices {spec.n_vertices}", f"beta {spec.beta!r}"]
    for e in spec.edges:
        lines.append(f"edge {e.edge_id} {e.coefficient!r} " + " ".join(map(str, e.vertices)))
    return "\n".join(lines) + "\n"


def parse_samples(text: str) -> SampleBatch:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([int(tok) for tok in line.split()])
        except ValueError:
            raise SpecParseError("sample entries must be +1 or -1", lineno) from None
        if len(rows[-1]) != len(rows[0]) or any(v not in (1, -1) for v in rows[-1]):
            raise SpecParseError("ragged row or entry other than +-1", lineno)
    if not rows:
        raise SpecParseError("no samples")
    return SampleBatch(np.array(rows))


def format_samples(batch: SampleBatch) -> str:
    return "".join(" ".join(map(str, row)) + "\n" for row in batch.samples.tolist())


def _configurations(n: int) -> np.ndarray:
    """All of ``{-1, +1}^n``; row ``i`` has vertex 0 as the most significant bit."""
    bits = (np.arange(1 << n)[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)


def log_weights(spec: MrfSpec, configs: np.ndarray) -> np.ndarray:
    energy = np.zeros(len(configs))
    for e in spec.edges:
        energy += e.coefficient * np.prod(configs[:, list(e.vertices)], axis=1)
    return -spec.beta * energy


def enumerate_distribution(spec: MrfSpec) -> Tuple[np.ndarray, np.ndarray]:
    """``(configs, probabilities)`` over the full cube."""
    if spec.n_vertices > ENUMERATION_CAP:
        raise ValueError(f"{spec.n_vertices} vertices exceed the enumeration cap of {ENUMERATION_CAP}")
    configs = _configurations(spec.n_vertices)
    lw = log_weights(spec, configs)
    return configs, np.exp(lw - logsumexp(lw))


def sample_mrf(spec: MrfSpec, count: int, seed: int) -> SampleBatch:
    """Exact i.i.d. samples by inverse-CDF draws from the enumerated distribution."""
    if count < 1:
        raise ValueError("count must be positive")
    configs, p = enumerate_distribution(spec)
    idx = draw(p, count, stream(seed))
    return SampleBatch(configs[idx], seed)


def build_in_out_sets(spec: MrfSpec, s: Hyperedge, v: int) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Vertices whose signed averaging cancels every other edge through ``v``.

    For each other edge ``T`` containing ``v``: if ``T`` leaves ``S``, one
    vertex of ``T - S`` goes to ``N_out``; otherwise one vertex of ``S - T``
    goes to ``N_in``.  Vertices already chosen are reused when they qualify.
    """
    if v not in s.vertices:
        raise ValueError("v must belong to the edge")
    s_set = set(s.vertices)
    n_in: List[int] = []
    n_out: List[int] = []
    for t in spec.incident(v):
        if t.edge_id == s.edge_id:
            continue
        t_set = set(t.vertices)
        if not t_set <= s_set:
            options = sorted(t_set - s_set)
            if not any(u in n_out for u in options):
                n_out.append(options[0])
        else:
            options = sorted(s_set - t_set)
            if not any(u in n_in for u in options):
                n_in.append(options[0])
    return tuple(sorted(n_in)), tuple(sorted(n_out))


def conditioning_assignments(spec: MrfSpec, v: int, n_in, n_out):
    """Yield ``(slice_values, assignment)`` pairs; ``assignment`` covers ``N_v`` with non-slice entries +1."""
    nbrs = spec.neighborhood(v)
    slice_vertices = tuple(sorted(set(n_in) | set(n_out)))
    for vals in product((1, -1), repeat=len(slice_vertices)):
        z = dict(zip(slice_vertices, vals))
        yield z, tuple(z.get(u, 1) for u in nbrs)


ConditionalFn = Callable[[int, Tuple[int, ...], Tuple[int, ...]], float]


def exact_conditional(spec: MrfSpec) -> ConditionalFn:
    """``Pr[X_v = +1 | X_{N_v} = assignment]`` by marginalizing the enumerated distribution."""
    configs, p = enumerate_distribution(spec)

    def fn(v, nbrs, assignment):
        mask = np.all(configs[:, list(nbrs)] == np.array(assignment, dtype=np.int8), axis=1) if nbrs else \
            np.ones(len(configs), dtype=bool)
        total = p[mask].sum()
        return float(p[mask & (configs[:, v] == 1)].sum() / total)

    return fn


@dataclass
class MrfEstimate:
    """Per-edge estimates; ``nan`` marks edges whose conditioning events had no samples."""

    edge_ids: Tuple[str, ...]
    estimates: np.ndarray
    pivots: Dict[str, int]
    insufficient: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    sample_count: Optional[int] = None
    seed: Optional[int] = None

    def to_text(self) -> str:
        lines = [f"#S\t{'' if self.sample_count is None else self.sample_count}",
                 f"#seed\t{'' if self.seed is None else self.seed}",
                 f"#insufficient\t{','.join(self.insufficient)}",
                 "term_id\testimate"]
        lines += [f"{a}\t{v:.17g}" for a, v in zip(self.edge_ids, self.estimates)]
        return "\n".join(lines) + "\n"


class _EmpiricalConditional:
    def __init__(self, samples: np.ndarray):
        self.samples = samples
        self.total = samples.shape[0]
        self.clipped = 0

    def counts(self, v, nbrs, assignment) -> Tuple[int, int]:
        if nbrs:
            mask = np.all(self.samples[:, list(nbrs)] == np.array(assignment, dtype=np.int8), axis=1)
        else:
            mask = np.ones(self.total, dtype=bool)
        return int(mask.sum()), int(np.sum(mask & (self.samples[:, v] == 1)))

    def __call__(self, v, nbrs, assignment) -> float:
        n, k = self.counts(v, nbrs, assignment)
        if n == 0:
            return math.nan
        p = k / n
        lo = 1.0 / (2 * self.total)
        if p < lo or p > 1 - lo:
            self.clipped += 1
            p = min(max(p, lo), 1 - lo)
        return p


def estimate_edges(spec: MrfSpec, conditional: ConditionalFn, beta: Optional[float] = None) -> MrfEstimate:
    """Slice-averaged logit estimator for every edge, given a conditional-probability source.

    ``lambda_S = -(1 / 2 beta) * mean over the slice of z^{N_in} * logit Pr[X_v = +1 | X_{N_v} = z]``.
    """
    beta = spec.beta if beta is None else beta
    out = np.zeros(len(spec.edges))
    pivots: Dict[str, int] = {}
    insufficient = []
    for k, s in enumerate(spec.edges):
        v = min(s.vertices)
        pivots[s.edge_id] = v
        n_in, n_out = build_in_out_sets(spec, s, v)
        nbrs = spec.neighborhood(v)
        acc = 0.0
        count = 0
        for z, assignment in conditioning_assignments(spec, v, n_in, n_out):
            p = conditional(v, nbrs, assignment)
            if math.isnan(p):
                acc = math.nan
                break
            sign = math.prod(z[u] for u in n_in)
            acc += sign * float(logit(p))
            count += 1
        if math.isnan(acc):
            insufficient.append(s.edge_id)
            out[k] = math.nan
        else:
            out[k] = -acc / count / (2 * beta)
    return MrfEstimate(spec.edge_ids, out, pivots, insufficient)


def learn_mrf(spec: MrfSpec, samples: SampleBatch, beta: Optional[float] = None) -> MrfEstimate:
    """Estimate every edge coefficient of ``spec`` (coefficients ignored) from samples."""
    if samples.count < 1:
        raise ValueError("need at least one sample")
    if samples.samples.shape[1] != spec.n_vertices:
        raise ValueError("sample width does not match the vertex count")
    cond = _EmpiricalConditional(samples.samples)
    est = estimate_edges(spec, cond, beta)
    est.sample_count = samples.count
    est.seed = samples.seed
    if cond.clipped:
        msg = f"{cond.clipped} empirical conditionals at 0 or 1 were clipped to 1/(2T)"
        log.warning(msg)
        est.warnings.append(msg)
    if est.insufficient:
        est.warnings.append("insufficient data for edges " + ", ".join(est.insufficient))
    return est


def min_conditional_bound(beta: float, degree: int) -> float:
    """Lower bound ``1 / (exp(2 beta d) + 1)`` on any single-vertex conditional."""
    return 1.0 / (math.exp(2 * beta * degree) + 1)


def min_conditional(spec: MrfSpec) -> float:
    """Smallest exact ``Pr[X_v = b | X_{N_v} = z]`` over all vertices, signs and neighborhood values."""
    configs, p = enumerate_distribution(spec)
    best = 1.0
    for v in range(spec.n_vertices):
        nbrs = list(spec.neighborhood(v))
        keys = configs[:, nbrs] if nbrs else np.zeros((len(configs), 0), dtype=np.int8)
        _, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.ravel()
        tot = np.bincount(inv, weights=p)
        plus = np.bincount(inv, weights=p * (configs[:, v] == 1))
        frac = plus / tot
        best = min(best, float(np.min(np.minimum(frac, 1 - frac))))
    return best


def sigmoid_gap_bound(x: float, y: float) -> float:
    """``exp(-|x| - 3) * min(1, |x - y|)``, a lower bound on ``|sigma(x) - sigma(y)|``."""
    return math.exp(-abs(x) - 3) * min(1.0, abs(x - y))


def sigmoid(x):
    return expit(x)


def mrf_sample_size(beta: float, epsilon: float, delta: float, degree: int, order: float, n_vertices: int,
                    constant: float = 1.0) -> int:
    """``ceil(C exp(8 beta L d^2 + 2 L d) / (beta eps)^2 * ln(N / delta))``."""
    if beta <= 0 or not (0 < epsilon < 1) or not (0 < delta < 1) or n_vertices < 1:
        raise ValueError("need beta > 0, epsilon and delta in (0, 1), and at least one vertex")
    expo = 8 * beta * order * degree ** 2 + 2 * order * degree
    return math.ceil(constant * math.exp(expo) / (beta * epsilon) ** 2 * math.log(n_vertices / delta))
