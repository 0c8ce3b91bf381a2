"""Learning coefficients from short-time evolution ``U = exp(-i t H)``.

For each term a single-qubit probe ``P_a`` anticommuting with ``E_a`` is
evolved, and ``F_a = Tr(Q_a U P_a U^dagger) / 2^N`` with ``Q_a = 2i P_a E_a``
is read out.  Its series in ``t`` starts with ``4 t lambda_a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .hamiltonian import Coloring, DualGraph, HamiltonianSpec, build_dual_graph, greedy_coloring
from .pauli import PauliString, commutes, pauli_product
from .qsim import (DEFAULT_CAP, EstimateVector, _ROTATIONS, apply_local, evolution_operator, local_bases,
                   outcome_signs, pauli_action, stream)
from .series import ExpansionParameters, Monomial, TermSeries, truncation_order
from .solver import LearnReport, newton_learn


@dataclass(frozen=True)
class ProbePair:
    """Probe ``P`` and readout ``Q = 2 * q_sign * q_pauli``."""

    term_id: str
    probe: PauliString
    q_sign: int
    q_pauli: PauliString

    @property
    def probe_qubit(self) -> int:
        return self.probe.support[0]

    @property
    def probe_letter(self) -> str:
        return self.probe.letter(self.probe_qubit)

    def q_matrix(self) -> np.ndarray:
        return 2 * self.q_sign * self.q_pauli.to_matrix()


def choose_probe(h: HamiltonianSpec, a: str) -> ProbePair:
    """X on the lowest support qubit of ``E_a`` if ``E_a`` has Z or Y there, else Z."""
    op = h.operator(a)
    q = op.support[0]
    letter = "X" if op.letter(q) in ("Z", "Y") else "Z"
    probe = PauliString.from_tokens([f"{letter}{q}"], h.n_qubits)
    if commutes(probe, op):
        raise AssertionError("probe commutes with its term")
    e, r = pauli_product(probe, op)
    phase = (1 + e) % 4  # 2i P E = 2 i^(1+e) R
    if phase % 2:
        raise AssertionError("readout operator is not Hermitian")
    return ProbePair(a, probe, 1 if phase == 0 else -1, r)


@dataclass(frozen=True)
class DynamicsSpec:
    """Evolution time, critical time and the repetition count ``n = floor(t_c / t)``."""

    t: float
    t_c: float

    def __post_init__(self):
        if self.t <= 0 or self.t_c <= 0:
            raise ValueError("times must be positive")

    @classmethod
    def from_degree(cls, t: float, degree: int) -> "DynamicsSpec":
        return cls(t, default_critical_time(degree))

    @property
    def repetitions(self) -> int:
        return max(1, math.floor(self.t_c / self.t))

    @property
    def effective_time(self) -> float:
        return self.t * self.repetitions


def default_critical_time(degree: int) -> float:
    return 1.0 / (4 * ExpansionParameters(degree).tau)


def _nested_commutators(h: HamiltonianSpec, probe: PauliString, order: int, allowed: Sequence[int]):
    """Yield, for ``n = 1..order``, the map ``(pauli, monomial) -> Gaussian integer`` of ``[H, P]_n``.

    ``[E_b, R] = 2 E_b R`` when they anticommute and 0 otherwise.
    """
    n_q = h.n_qubits
    per_qubit: List[List[int]] = [[] for _ in range(n_q)]
    for i in allowed:
        for q in h.terms[i].operator.support:
            per_qubit[q].append(i)
    ops = [t.operator for t in h.terms]
    state: Dict[tuple, Tuple[int, int]] = {((probe.x, probe.z), ()): (1, 0)}
    for _ in range(order):
        nxt: Dict[tuple, Tuple[int, int]] = {}
        for ((x, z), mono), (re, im) in state.items():
            r = PauliString(n_q, x, z)
            touched = sorted({i for q in r.support for i in per_qubit[q]})
            for i in touched:
                if commutes(ops[i], r):
                    continue
                e, s = pauli_product(ops[i], r)
                cr, ci = 2 * re, 2 * im
                for _ in range(e):
                    cr, ci = -ci, cr
                key = ((s.x, s.z), tuple(sorted(mono + (i,))))
                old = nxt.get(key, (0, 0))
                nxt[key] = (old[0] + cr, old[1] + ci)
        state = {k: v for k, v in nxt.items() if v != (0, 0)}
        yield state


def build_dynamics_series(h: HamiltonianSpec, g: DualGraph, a: str, m_hat: int, shift: float = 0.0) -> TermSeries:
    """Exact truncated series ``F_a = sum_n t^n q_n(x)`` for the probe pair of term ``a``.

    The coefficient of ``t^n x^nu`` is ``(-i)^n / n!`` times the normalized
    trace of ``Q_a`` against the ``x^nu`` part of ``[H, P_a]_n``.  Only terms
    within graph distance ``m_hat`` of ``a`` can contribute.
    """
    if m_hat < 1:
        raise ValueError("m_hat must be at least 1")
    pair = choose_probe(h, a)
    dist = g.distances_from(a)
    allowed = [h.index(b) for b, d in dist.items() if d <= m_hat]
    ids = h.term_ids
    target = (pair.q_pauli.x, pair.q_pauli.z)
    monomials = []
    for n, state in enumerate(_nested_commutators(h, pair.probe, m_hat, allowed), start=1):
        # (-i)^n * 2 * q_sign * c, with c a Gaussian integer; the result must be real
        found = []
        for (key, mono), (re, im) in state.items():
            if key != target:
                continue
            cr, ci = re, im
            for _ in range((3 * n) % 4):
                cr, ci = -ci, cr
            if ci != 0:
                raise ArithmeticError("dynamics coefficient is not real")
            if cr == 0:
                continue
            counts: Dict[int, int] = {}
            for i in mono:
                counts[i] = counts.get(i, 0) + 1
            exps = tuple((ids[i], e) for i, e in sorted(counts.items()))
            found.append(Monomial(n, Fraction(2 * pair.q_sign * cr, math.factorial(n)), exps))
        found.sort(key=lambda mono: [(h.index(b), -e) for b, e in mono.exponents])
        monomials += found
    return TermSeries(a, float(shift), monomials, m_hat, tuple(ids))


def exact_dynamics_values(h: HamiltonianSpec, t: float, probes: Optional[Sequence[ProbePair]] = None,
                          cap: int = DEFAULT_CAP, unitary: Optional[np.ndarray] = None) -> np.ndarray:
    """``Tr(Q_a U P_a U^dagger) / 2^N`` for every term, by dense simulation."""
    probes = probes or [choose_probe(h, a) for a in h.term_ids]
    u = evolution_operator(h, t, cap) if unitary is None else unitary
    dim = u.shape[0]
    out = []
    for pr in probes:
        evolved = u @ pr.probe.to_matrix() @ u.conj().T
        out.append(float(np.real(np.trace(pr.q_matrix() @ evolved))) / dim)
    return np.array(out)


_STATES = {
    0: np.array([1, 0], dtype=complex),
    1: np.array([0, 1], dtype=complex),
    2: np.array([1, 1], dtype=complex) / np.sqrt(2),
    3: np.array([1, -1], dtype=complex) / np.sqrt(2),
    4: np.array([1, 1j], dtype=complex) / np.sqrt(2),
    5: np.array([1, -1j], dtype=complex) / np.sqrt(2),
}
# label of the +1 eigenstate of each probe letter among 0, 1, +, -, +i, -i
_PLUS_EIGENSTATE = {"Z": 0, "X": 2, "Y": 4}


def product_state(labels: Sequence[int]) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for s in labels:
        out = np.kron(out, _STATES[int(s)])
    return out


def _round_probabilities(u: np.ndarray, labels: Sequence[int], bases: Sequence[str]) -> np.ndarray:
    psi = u @ product_state(labels)
    rotated = apply_local(psi[:, None], [_ROTATIONS[b] for b in bases])[:, 0]
    p = np.abs(rotated) ** 2
    return p / p.sum()


def sample_dynamics_estimates(h: HamiltonianSpec, probes: Sequence[ProbePair], shots: int, seed: int,
                              t: float, coloring: Optional[Coloring] = None, repetitions: int = 1,
                              cap: int = DEFAULT_CAP) -> EstimateVector:
    """Randomized product-state estimates of ``F_a``.

    Each shot of color round ``c`` draws a label string from
    ``{0, 1, +, -, +i, -i}^N``, evolves the product state under ``U^repetitions``,
    measures the readout Paulis of that color, and keeps the signed outcome only
    when the probe qubit was prepared in the +1 eigenstate of its probe.
    Returns ``12 * mean`` per term.
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    coloring = coloring or greedy_coloring(build_dual_graph(h))
    by_id = {p.term_id: p for p in probes}
    u = np.linalg.matrix_power(evolution_operator(h, t, cap), repetitions)
    n = h.n_qubits
    values = np.zeros(h.n_terms)
    counts = np.zeros(h.n_terms, dtype=np.int64)
    kept = np.zeros(h.n_terms)
    for c, members in enumerate(coloring.classes()):
        if not members:
            continue
        # readout Paulis share the support of their terms, so the coloring still batches them
        bases = local_bases(n, [by_id[a].q_pauli for a in members])
        rng = stream(seed, c)
        labels = rng.integers(0, 6, size=(shots, n))
        uniforms = rng.random(shots)
        outcomes = np.empty(shots, dtype=np.int64)
        cache: Dict[bytes, np.ndarray] = {}
        for s in range(shots):
            key = labels[s].tobytes()
            cdf = cache.get(key)
            if cdf is None:
                cdf = np.cumsum(_round_probabilities(u, labels[s], bases))
                cdf[-1] = 1.0
                cache[key] = cdf
            outcomes[s] = np.searchsorted(cdf, uniforms[s], side="right")
        for a in members:
            pr = by_id[a]
            i = h.index(a)
            y = pr.q_sign * outcome_signs(outcomes, n, pr.q_pauli)
            keep = labels[:, pr.probe_qubit] == _PLUS_EIGENSTATE[pr.probe_letter]
            values[i] = 12.0 * np.mean(np.where(keep, y, 0))
            kept[i] = keep.mean()
            counts[i] = shots
    return EstimateVector(tuple(h.term_ids), values, counts, seed, kept)


def exhaustive_dynamics_estimates(h: HamiltonianSpec, probes: Sequence[ProbePair], t: float,
                                  repetitions: int = 1, cap: int = DEFAULT_CAP, chunk: int = 4096) -> np.ndarray:
    """Exact mean of ``12 Z_a`` over all ``6^N`` label strings, using exact outcome averages."""
    u = np.linalg.matrix_power(evolution_operator(h, t, cap), repetitions)
    n = h.n_qubits
    single = np.stack([_STATES[k] for k in range(6)])
    actions = [(pr, *pauli_action(pr.q_pauli)) for pr in probes]
    total = np.zeros(len(probes))
    labels_all = np.array(list(np.ndindex(*([6] * n))), dtype=np.int64).reshape(-1, n)
    for lo in range(0, len(labels_all), chunk):
        labels = labels_all[lo:lo + chunk]
        states = np.ones((len(labels), 1), dtype=complex)
        for q in range(n):
            states = (states[:, :, None] * single[labels[:, q]][:, None, :]).reshape(len(labels), -1)
        psi = states @ u.T
        for k, (pr, target, phase) in enumerate(actions):
            keep = labels[:, pr.probe_qubit] == _PLUS_EIGENSTATE[pr.probe_letter]
            sub = psi[keep]
            y = np.real(np.sum(sub[:, target].conj() * phase * sub, axis=1))
            total[k] += 12.0 * pr.q_sign * y.sum()
    return total / 6 ** n


def learn_from_dynamics(fs: Sequence[TermSeries], t: float, epsilon: float, params: ExpansionParameters,
                        allow_unguaranteed: bool = False, **kwargs) -> LearnReport:
    """Newton inversion of the dynamics series; the leading Jacobian is ``+4t I``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        # U = I carries no information about the coefficients
        x = np.zeros(len(fs))
        residual = float(np.max(np.abs([f.shift for f in fs]))) if fs else 0.0
        report = LearnReport(tuple(fs[0].variables), x, 0, residual, params, False, history=[x.copy()])
        report.warnings.append("evolution time is zero; estimates carry no signal")
        return report
    return newton_learn(fs, t, epsilon, params, allow_unguaranteed=allow_unguaranteed, scale=-4.0 * t, **kwargs)


def dynamics_truncation_order(t: float, epsilon: float, params: ExpansionParameters) -> int:
    """Cutoff for the t-series, using the Gibbs-side rule with ``beta -> t``."""
    return truncation_order(t, epsilon, params)
