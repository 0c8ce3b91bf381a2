"""Hard-instance family, closed-form KL divergences and two numerical certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .hamiltonian import HamiltonianSpec
from .qsim import DEFAULT_CAP, CapExceededError, hamiltonian_matrix
from .series import SparseJacobian

PROB_TOL = 1e-12


@dataclass(frozen=True)
class DiagonalDistribution:
    """Outcome probabilities of a diagonal state, with a note on where they came from."""

    probs: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1) > PROB_TOL:
            raise ValueError("probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "probs", p)

    def tensor(self, other: "DiagonalDistribution") -> "DiagonalDistribution":
        return DiagonalDistribution(np.kron(self.probs, other.probs), f"{self.provenance}*{other.provenance}")


def pair_terms(k: int, epsilon: Optional[float]) -> List[Tuple[str, List[str], float]]:
    """Terms of one qubit pair; ``epsilon=None`` gives the unflipped block."""
    e = 0.0 if epsilon is None else epsilon
    a, b = 2 * k, 2 * k + 1
    return [
        (f"z{k}a", [f"Z{a}"], -1.0),
        (f"z{k}b", [f"Z{b}"], -0.5 + e),
        (f"zz{k}", [f"Z{a}", f"Z{b}"], -0.5 - e),
    ]


def hard_instance(n_pairs: int, beta: float, epsilon: float, flip_index: Optional[int] = None) -> HamiltonianSpec:
    """Diagonal Hamiltonian on ``2 n_pairs`` qubits; only pair ``flip_index`` is perturbed by ``epsilon``."""
    if not 0 < epsilon <= 0.5:
        raise ValueError("epsilon must lie in (0, 1/2]")
    if n_pairs < 1:
        raise ValueError("need at least one pair")
    if flip_index is not None and not 0 <= flip_index < n_pairs:
        raise ValueError("flip_index out of range")
    terms = []
    for k in range(n_pairs):
        terms += pair_terms(k, epsilon if k == flip_index else None)
    return HamiltonianSpec.from_terms(2 * n_pairs, terms, beta)


def pair_distribution(beta: float, epsilon: Optional[float] = None) -> DiagonalDistribution:
    """Closed-form Gibbs diagonal of one pair: weights ``e^{2b}, 1, e^{-b-2be}, e^{-b+2be}``.

    The order matches the computational basis of :func:`hard_instance`.
    """
    e = 0.0 if epsilon is None else epsilon
    logits = np.array([2 * beta, 0.0, -beta - 2 * beta * e, -beta + 2 * beta * e])
    return DiagonalDistribution(np.exp(logits - logsumexp(logits)), "flipped" if epsilon else "base")


def diagonal_gibbs(h: HamiltonianSpec, cap: int = DEFAULT_CAP) -> DiagonalDistribution:
    """Gibbs distribution of a diagonal Hamiltonian from its dense matrix."""
    mat = hamiltonian_matrix(h, cap)
    if np.any(np.abs(mat - np.diag(np.diag(mat))) > 0):
        raise ValueError("Hamiltonian is not diagonal")
    logits = -h.beta * np.real(np.diag(mat))
    return DiagonalDistribution(np.exp(logits - logsumexp(logits)), "dense")


def kl_divergence(p: DiagonalDistribution, q: DiagonalDistribution) -> float:
    """``sum_j p_j log(p_j / q_j)``; ``inf`` when ``p`` has mass where ``q`` has none."""
    pp, qq = p.probs, q.probs
    if pp.shape != qq.shape:
        raise ValueError("distributions have different sizes")
    mask = pp > 0
    if np.any(qq[mask] <= 0):
        return math.inf
    return float(np.sum(pp[mask] * np.log(pp[mask] / qq[mask])))


def kl_closed_form(beta: float, epsilon: float) -> float:
    """``D(q_1 || q_0)`` for one pair via the reduced two-term expression."""
    b, e = beta, epsilon
    z1 = math.exp(2 * b) + 1 + math.exp(-b + 2 * b * e) + math.exp(-b - 2 * b * e)
    z0 = math.exp(2 * b) + 1 + 2 * math.exp(-b)
    return 2 * b * e * math.exp(-b + 2 * b * e) * (1 - math.exp(-4 * b * e)) / z1 - math.log(z1 / z0)


def kl_bound(beta: float, epsilon: float) -> float:
    """``8 beta^2 eps^2 e^{-2 beta}``, valid for ``eps <= 1/2``."""
    return 8 * beta ** 2 * epsilon ** 2 * math.exp(-2 * beta)


def kl_grid(betas: Sequence[float], epsilons: Sequence[float]) -> List[Tuple[float, float, float, float, bool]]:
    """Rows ``(beta, eps, KL, bound, KL <= bound)``."""
    rows = []
    for b in betas:
        for e in epsilons:
            kl = kl_divergence(pair_distribution(b, e), pair_distribution(b))
            bound = kl_bound(b, e)
            rows.append((b, e, kl, bound, kl <= bound))
    return rows


def jacobian_norm_certificate(j, beta: float) -> float:
    """``||I + J / beta||`` in the infinity-to-infinity norm (largest absolute row sum)."""
    mat = j.matrix if isinstance(j, SparseJacobian) else j
    mat = mat.toarray() if hasattr(mat, "toarray") else np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("Jacobian must be square")
    a = np.eye(mat.shape[0]) + mat / beta
    return float(np.max(np.sum(np.abs(a), axis=1))) if a.size else 0.0


def _log_partition_scaled(ops: np.ndarray, z: np.ndarray) -> float:
    w = np.linalg.eigvalsh(np.tensordot(z, ops, axes=1))
    return float(logsumexp(-w))


def log_partition_hessian(h: HamiltonianSpec, step: float = 1e-4, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Hessian of ``lambda -> log Tr exp(-beta sum lambda_a E_a)`` at the coefficients of ``h``.

    Central differences are taken in ``z = beta * lambda`` so the step does not
    shrink with ``beta``; the result is rescaled by ``beta^2``.
    """
    if h.n_qubits > cap:
        raise CapExceededError(f"{h.n_qubits} qubits exceed the dense cap of {cap}")
    ops = np.stack([t.operator.to_matrix() for t in h.terms])
    z0 = h.beta * h.coefficients
    m = len(z0)
    f0 = _log_partition_scaled(ops, z0)
    hess = np.zeros((m, m))
    for a in range(m):
        ea = np.zeros(m)
        ea[a] = step
        hess[a, a] = (_log_partition_scaled(ops, z0 + ea) - 2 * f0 + _log_partition_scaled(ops, z0 - ea)) / step ** 2
        for b in range(a):
            eb = np.zeros(m)
            eb[b] = step
            val = (_log_partition_scaled(ops, z0 + ea + eb) - _log_partition_scaled(ops, z0 + ea - eb)
                   - _log_partition_scaled(ops, z0 - ea + eb) + _log_partition_scaled(ops, z0 - ea - eb))
            hess[a, b] = hess[b, a] = val / (4 * step ** 2)
    return h.beta ** 2 * hess


def strong_convexity_certificate(h: HamiltonianSpec, step: float = 1e-4, cap: int = DEFAULT_CAP) -> Tuple[float, float]:
    """Smallest and largest eigenvalue of the dense log-partition Hessian."""
    eig = np.linalg.eigvalsh(log_partition_hessian(h, step, cap))
    return float(eig[0]), float(eig[-1])
