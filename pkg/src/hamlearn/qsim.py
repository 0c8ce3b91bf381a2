"""Dense small-register simulator: Gibbs states, exact expectations, sampling, evolution.

Basis index convention: qubit 0 is the most significant bit of the index,
matching ``np.kron`` ordering with qubit 0 leftmost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .hamiltonian import Coloring, HamiltonianSpec
from .pauli import PauliString

DEFAULT_CAP = 12

_ROTATIONS = {
    "Z": np.eye(2, dtype=complex),
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    # H S^dagger sends the +1 eigenvector of Y to |0>
    "Y": np.array([[1, -1j], [1, 1j]], dtype=complex) / np.sqrt(2),
}


class CapExceededError(ValueError):
    """The register is too large for dense simulation."""


def _check_cap(n_qubits: int, cap: int) -> None:
    if n_qubits > cap:
        raise CapExceededError(f"{n_qubits} qubits exceed the dense cap of {cap}")


def _reverse_bits(mask: int, n: int) -> int:
    out = 0
    for q in range(n):
        if (mask >> q) & 1:
            out |= 1 << (n - 1 - q)
    return out


def pauli_action(p: PauliString) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(target, phase)`` with ``P |i> = phase[i] |target[i]>``."""
    n = p.n_qubits
    idx = np.arange(1 << n, dtype=np.int64)
    xr = _reverse_bits(p.x, n)
    zr = _reverse_bits(p.z, n)
    parity = np.zeros(1 << n, dtype=np.int64)
    v = idx & zr
    while np.any(v):
        parity ^= v & 1
        v >>= 1
    ny = bin(p.x & p.z).count("1")
    phase = (1j ** ny) * (1 - 2 * parity)
    return idx ^ xr, phase.astype(complex)


def hamiltonian_matrix(h: HamiltonianSpec, cap: int = DEFAULT_CAP) -> np.ndarray:
    _check_cap(h.n_qubits, cap)
    dim = 1 << h.n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for t in h.terms:
        target, phase = pauli_action(t.operator)
        out[target, cols] += t.coefficient * phase
    return out


def pauli_expectation(p: PauliString, rho: np.ndarray) -> float:
    """``Tr(P rho)`` for a density matrix or ``<psi|P|psi>`` for a vector."""
    target, phase = pauli_action(p)
    if rho.ndim == 1:
        return float(np.real(np.vdot(rho[target], phase * rho)))
    cols = np.arange(rho.shape[0])
    return float(np.real(np.sum(rho[cols, target] * phase)))


@dataclass
class GibbsState:
    """Eigendecomposed thermal state ``rho = V diag(weights) V^dagger``."""

    eigenvectors: np.ndarray
    weights: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.weights) @ v.conj().T


def _eigh(h: HamiltonianSpec, cap: int):
    return np.linalg.eigh(hamiltonian_matrix(h, cap))


def gibbs_decomposition(h: HamiltonianSpec, cap: int = DEFAULT_CAP) -> GibbsState:
    w, v = _eigh(h, cap)
    logits = -h.beta * w
    weights = np.exp(logits - logsumexp(logits))
    return GibbsState(v, weights)


def gibbs_state(h: HamiltonianSpec, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Dense ``exp(-beta H) / Tr exp(-beta H)``."""
    return gibbs_decomposition(h, cap).matrix


def log_partition(h: HamiltonianSpec, cap: int = DEFAULT_CAP) -> float:
    """``log Tr exp(-beta H)``."""
    w = np.linalg.eigvalsh(hamiltonian_matrix(h, cap))
    return float(logsumexp(-h.beta * w))


def exact_expectations(h: HamiltonianSpec, cap: int = DEFAULT_CAP) -> np.ndarray:
    """``Tr(E_a rho)`` for every term."""
    rho = gibbs_state(h, cap)
    return np.array([pauli_expectation(t.operator, rho) for t in h.terms])


@dataclass
class EstimateVector:
    term_ids: Tuple[str, ...]
    values: np.ndarray
    shots: np.ndarray
    seed: Optional[int] = None
    kept: Optional[np.ndarray] = None  # fraction of shots contributing, when shots are post-selected

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.term_ids, map(float, self.values)))


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator keyed by the master seed and stream labels."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def local_bases(n_qubits: int, ops: Sequence[PauliString]) -> list:
    """Single-qubit measurement letter per qubit that measures every op in ``ops`` at once."""
    bases = ["Z"] * n_qubits
    claimed = [False] * n_qubits
    for op in ops:
        for q in op.support:
            letter = op.letter(q)
            if claimed[q] and bases[q] != letter:
                raise AssertionError(f"conflicting measurement bases on qubit {q}")
            bases[q] = letter
            claimed[q] = True
    return bases


def color_bases(h: HamiltonianSpec, members: Sequence[str]) -> list:
    """Single-qubit measurement letter per qubit for one color round."""
    return local_bases(h.n_qubits, [h.operator(a) for a in members])


def apply_local(states: np.ndarray, gates: Sequence[np.ndarray]) -> np.ndarray:
    """Apply ``gates[q]`` on qubit ``q`` to each column of ``states``."""
    n = len(gates)
    k = states.shape[1]
    t = states.reshape([2] * n + [k])
    for q, gate in enumerate(gates):
        t = np.moveaxis(np.tensordot(gate, t, axes=([1], [q])), 0, q)
    return t.reshape(1 << n, k)


def measurement_probabilities(state: GibbsState, bases: Sequence[str]) -> np.ndarray:
    rotated = apply_local(state.eigenvectors, [_ROTATIONS[b] for b in bases])
    p = np.abs(rotated) ** 2 @ state.weights
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def outcome_signs(outcomes: np.ndarray, n_qubits: int, op: PauliString) -> np.ndarray:
    """``+-1`` eigenvalue of ``op`` for each measured basis index."""
    mask = _reverse_bits(op.support_mask, n_qubits)
    v = outcomes & mask
    parity = np.zeros_like(v)
    while np.any(v):
        parity ^= v & 1
        v >>= 1
    return 1 - 2 * parity


def draw(p: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(shots), side="right")


def sample_pauli_estimates(h: HamiltonianSpec, coloring: Coloring, shots: int, seed: int,
                           cap: int = DEFAULT_CAP) -> EstimateVector:
    """Estimate every ``<E_a>`` with ``shots`` measurements per color round.

    Round ``c`` measures each qubit in the basis demanded by the color-``c``
    terms touching it (Z elsewhere) and uses the random stream ``(seed, c)``.
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    state = gibbs_decomposition(h, cap)
    values = np.zeros(h.n_terms)
    counts = np.zeros(h.n_terms, dtype=np.int64)
    for c, members in enumerate(coloring.classes()):
        if not members:
            continue
        p = measurement_probabilities(state, color_bases(h, members))
        outcomes = draw(p, shots, stream(seed, c))
        for a in members:
            i = h.index(a)
            values[i] = outcome_signs(outcomes, h.n_qubits, h.operator(a)).mean()
            counts[i] = shots
    return EstimateVector(tuple(h.term_ids), values, counts, seed)


def evolution_operator(h: HamiltonianSpec, t: float, cap: int = DEFAULT_CAP) -> np.ndarray:
    """``exp(-i t H)`` via eigendecomposition."""
    w, v = _eigh(h, cap)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def time_evolve(h: HamiltonianSpec, t: float, state: np.ndarray, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Evolve a pure state vector or a density matrix for time ``t``."""
    u = evolution_operator(h, t, cap)
    if state.ndim == 1:
        return u @ state
    return u @ state @ u.conj().T
