"""Truncated series of local expectation values and their Jacobian.

``F_a(x) = -shift_a + sum_{m=1}^{m_hat} beta^m p_m(x)`` where ``p_m`` is a
homogeneous polynomial of degree ``m`` with exact rational coefficients.
Coefficients are stored free of ``beta``; it enters only at evaluation time.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .clusters import enumerate_clusters
from .derivatives import cluster_derivative
from .hamiltonian import DualGraph, HamiltonianSpec

E = math.e


class RegimeError(ValueError):
    """Parameters fall outside the region where a formula is defined."""


@dataclass(frozen=True)
class ExpansionParameters:
    """Constants derived from the dual-graph degree plus the chosen iteration settings."""

    degree_bound: int
    truncation: int = 1
    neumann_depth: int = 1
    iterations: int = 1

    def __post_init__(self):
        if self.degree_bound < 0:
            raise ValueError("degree_bound must be non-negative")
        if min(self.truncation, self.neumann_depth, self.iterations) < 1:
            raise ValueError("truncation, neumann_depth and iterations must be >= 1")

    @property
    def tau(self) -> float:
        # an edgeless graph uses the degree-1 constant so tau stays positive
        d = max(self.degree_bound, 1)
        return (1 + E * (d - 1)) * (2 * E * (d + 1))

    def c(self, m: int) -> float:
        d = self.degree_bound
        return 2 * E ** 2 * d * (d + 1) * self.tau ** m * (m + 1)

    @property
    def beta_c_sample(self) -> float:
        return 1.0 / (100 * E ** 6 * (self.degree_bound + 1) ** 8)

    @property
    def beta_c_newton(self) -> float:
        return 1.0 / (25 * E ** 6 * (self.degree_bound + 1) ** 10)


def truncation_order(beta: float, epsilon: float, params: ExpansionParameters) -> int:
    """Smallest cutoff for which the series tail stays below ``2 * beta * epsilon``."""
    if not (0 < epsilon < 1):
        raise ValueError("epsilon must lie in (0, 1)")
    if beta <= 0:
        raise ValueError("beta must be positive")
    bt = beta * params.tau
    if bt >= 1:
        raise RegimeError(f"beta*tau = {bt:.4g} >= 1; the expansion does not converge")
    d = params.degree_bound
    lg = math.log(1 / bt)
    val = (E / (E - 1)) / lg * math.log(12 * E ** 2 * (d + 1) ** 2 / (beta * epsilon * lg))
    return max(1, math.ceil(val))


def tail_bound(beta: float, epsilon: float, m_hat: int, params: ExpansionParameters) -> float:
    d = params.degree_bound
    return 12 * E ** 2 * (d + 1) ** 2 * (beta * params.tau) ** m_hat * m_hat + beta * epsilon


@dataclass(frozen=True)
class Monomial:
    degree: int
    coefficient: Fraction
    exponents: Tuple[Tuple[str, int], ...]


@dataclass
class TermSeries:
    """Truncated polynomial for one term, plus its constant shift.

    Parameters
    ----------
    term_id : str
    shift : float
        The measured value subtracted as the constant term.
    monomials : list of Monomial
    truncation : int
    variables : tuple of str
        Ordering of the coefficient vector ``x``.
    """

    term_id: str
    shift: float
    monomials: List[Monomial]
    truncation: int
    variables: Tuple[str, ...]
    _compiled: Optional[tuple] = field(default=None, repr=False, compare=False)

    def with_shift(self, shift: float) -> "TermSeries":
        return TermSeries(self.term_id, float(shift), self.monomials, self.truncation, self.variables)

    def _compile(self):
        if self._compiled is None:
            index = {v: i for i, v in enumerate(self.variables)}
            n = len(self.monomials)
            cols = sorted({index[b] for mono in self.monomials for b, _ in mono.exponents})
            col_pos = {c: i for i, c in enumerate(cols)}
            exps = np.zeros((n, len(cols)), dtype=np.int64)
            for r, mono in enumerate(self.monomials):
                for b, e in mono.exponents:
                    exps[r, col_pos[index[b]]] = e
            coef = np.array([float(mono.coefficient) for mono in self.monomials])
            deg = np.array([mono.degree for mono in self.monomials], dtype=np.int64)
            self._compiled = (np.array(cols, dtype=np.int64), exps, coef, deg)
        return self._compiled

    def polynomial_value(self, x, beta: float) -> float:
        """``sum_m beta^m p_m(x)`` without the shift."""
        cols, exps, coef, deg = self._compile()
        if not len(coef):
            return 0.0
        x = np.asarray(x, dtype=float)
        vals = np.prod(x[cols][None, :] ** exps, axis=1)
        return float(np.sum(coef * beta ** deg * vals))

    def gradient(self, x, beta: float) -> Dict[int, float]:
        """Nonzero partial derivatives keyed by variable position."""
        cols, exps, coef, deg = self._compile()
        x = np.asarray(x, dtype=float)
        if not len(coef):
            return {}
        xs = x[cols]
        powers = xs[None, :] ** exps
        weights = coef * beta ** deg
        out = {}
        for k, c in enumerate(cols):
            e = exps[:, k]
            rows = e > 0
            if not rows.any():
                continue
            p = powers[rows].copy()
            p[:, k] = e[rows] * xs[k] ** (e[rows] - 1)
            out[int(c)] = float(np.sum(weights[rows] * np.prod(p, axis=1)))
        return out

    def degree_counts(self) -> Dict[int, int]:
        out: Dict[int, int] = {}
        for mono in self.monomials:
            out[mono.degree] = out.get(mono.degree, 0) + 1
        return out


def build_term_series(h: HamiltonianSpec, g: DualGraph, a: str, m_hat: int, shift: float = 0.0) -> TermSeries:
    """Exact truncated series of ``<E_a>`` for term ``a``.

    Every connected cluster ``V`` of weight ``m + 1`` containing ``a`` yields
    the monomial ``x^(V - a)`` with coefficient ``-mu_V(a) * D_V / V!``.
    """
    if m_hat < 1:
        raise ValueError("m_hat must be at least 1")
    order = {tid: i for i, tid in enumerate(h.term_ids)}
    merged: Dict[Tuple[Tuple[str, int], ...], Fraction] = {}
    degrees: Dict[Tuple[Tuple[str, int], ...], int] = {}
    for m in range(1, m_hat + 1):
        for cluster in enumerate_clusters(g, a, m + 1):
            value = cluster_derivative(cluster, h)
            if value == 0:
                continue
            counts = cluster.multiplicities
            mu_a = counts[a]
            counts[a] -= 1
            exps = tuple(sorted(((b, e) for b, e in counts.items() if e), key=lambda it: order[it[0]]))
            merged[exps] = merged.get(exps, Fraction(0)) - mu_a * value
            degrees[exps] = m
    monomials = [
        Monomial(degrees[k], c, k)
        for k, c in sorted(merged.items(), key=lambda it: (degrees[it[0]], [(order[b], -e) for b, e in it[0]]))
        if c != 0
    ]
    return TermSeries(a, float(shift), monomials, m_hat, tuple(h.term_ids))


def _build_one(args):
    h, g, a, m_hat = args
    return build_term_series(h, g, a, m_hat)


def build_all_series(h: HamiltonianSpec, g: DualGraph, m_hat: int, shifts=None, jobs: int = 1,
                     builder=None) -> List[TermSeries]:
    """Series for every term, optionally in parallel; output order is term order."""
    builder = builder or _build_one
    tasks = [(h, g, a, m_hat) for a in h.term_ids]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(builder, tasks))
    else:
        out = [builder(t) for t in tasks]
    if shifts is not None:
        shifts = np.asarray(shifts, dtype=float)
        out = [f.with_shift(s) for f, s in zip(out, shifts)]
    return out


def evaluate_series(f: TermSeries, x, beta: float) -> float:
    """``-shift + sum_m beta^m p_m(x)``."""
    return -f.shift + f.polynomial_value(x, beta)


def evaluate_all(fs: Sequence[TermSeries], x, beta: float) -> np.ndarray:
    return np.array([evaluate_series(f, x, beta) for f in fs])


@dataclass
class SparseJacobian:
    """Jacobian ``J[a, b] = dF_a / dx_b`` in compressed-column form."""

    term_ids: Tuple[str, ...]
    matrix: sparse.csc_matrix

    @property
    def dimension(self) -> int:
        return len(self.term_ids)

    def columns(self) -> Dict[str, List[Tuple[str, float]]]:
        m = self.matrix
        out = {}
        for j, b in enumerate(self.term_ids):
            lo, hi = m.indptr[j], m.indptr[j + 1]
            out[b] = [(self.term_ids[i], float(v)) for i, v in zip(m.indices[lo:hi], m.data[lo:hi])]
        return out

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def evaluate_jacobian(fs: Sequence[TermSeries], x, beta: float) -> SparseJacobian:
    n = len(fs)
    rows, cols, vals = [], [], []
    for i, f in enumerate(fs):
        for j, v in f.gradient(x, beta).items():
            if v != 0.0:
                rows.append(i)
                cols.append(j)
                vals.append(v)
    mat = sparse.csc_matrix((vals, (rows, cols)), shape=(n, n))
    mat.sort_indices()
    term_ids = fs[0].variables if fs else ()
    return SparseJacobian(tuple(term_ids), mat)


def format_fraction(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def parse_fraction(text: str) -> Fraction:
    num, _, den = text.partition("/")
    return Fraction(int(num), int(den or 1))


def dump_series(fs: Sequence[TermSeries]) -> str:
    """One line per monomial: ``a<TAB>m<TAB>p/q<TAB>b1^e1 b2^e2``."""
    lines = []
    for f in fs:
        for mono in f.monomials:
            body = " ".join(f"{b}^{e}" for b, e in mono.exponents)
            lines.append(f"{f.term_id}\t{mono.degree}\t{format_fraction(mono.coefficient)}\t{body}")
    return "\n".join(lines) + ("\n" if lines else "")
