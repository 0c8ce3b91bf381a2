"""Projected Newton-Raphson inversion of the series map and sample-size formulas."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .series import ExpansionParameters, RegimeError, TermSeries, evaluate_all, evaluate_jacobian

E = math.e
STEP_TOLERANCE = 1e-15


class NumericError(ArithmeticError):
    """A non-finite value appeared during the iteration."""

    def __init__(self, message: str, iteration: int):
        self.iteration = iteration
        super().__init__(f"iteration {iteration}: {message}")


@dataclass
class LearnReport:
    """Outcome of a learning run.

    Attributes
    ----------
    term_ids : tuple of str
    estimates : ndarray
        Recovered coefficients, each in [-1, 1].
    iterations_run : int
    residual_inf : float
        ``max_a |F_a(estimates)|``.
    params : ExpansionParameters
        Snapshot with the truncation, Neumann depth and iteration budget used.
    guaranteed : bool
        False when a regime threshold was overridden.
    sample_count, seed : int or None
        Filled in when estimates came from sampling.
    history : list of ndarray
        Iterates ``x^(0), x^(1), ...``.
    """

    term_ids: tuple
    estimates: np.ndarray
    iterations_run: int
    residual_inf: float
    params: ExpansionParameters
    guaranteed: bool = True
    sample_count: Optional[int] = None
    seed: Optional[int] = None
    history: List[np.ndarray] = field(default_factory=list, repr=False)
    warnings: List[str] = field(default_factory=list)

    def header(self) -> dict:
        p = self.params
        return {
            "residual_inf": f"{self.residual_inf:.17g}",
            "iterations": str(self.iterations_run),
            "m_hat": str(p.truncation),
            "K": str(p.neumann_depth),
            "T": str(p.iterations),
            "S": "" if self.sample_count is None else str(self.sample_count),
            "seed": "" if self.seed is None else str(self.seed),
            "guaranteed": "true" if self.guaranteed else "false",
        }

    def to_text(self) -> str:
        """Key-value header (``#key<TAB>value``) followed by ``term_id<TAB>estimate`` rows."""
        lines = [f"#{k}\t{v}" for k, v in self.header().items()]
        lines.append("term_id\testimate")
        lines += [f"{a}\t{v:.17g}" for a, v in zip(self.term_ids, self.estimates)]
        return "\n".join(lines) + "\n"


def parse_report(text: str) -> tuple:
    """Inverse of :meth:`LearnReport.to_text`; returns ``(header, {term_id: estimate})``."""
    header, values = {}, {}
    for line in text.splitlines():
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition("\t")
            header[key] = val
        elif line != "term_id\testimate":
            a, _, v = line.partition("\t")
            values[a] = float(v)
    return header, values


def neumann_depth(scale: float, epsilon: float) -> int:
    """``K = ceil(log2(3 / (scale * epsilon)))``, at least 1."""
    return max(1, math.ceil(math.log2(3.0 / (abs(scale) * epsilon))))


def iteration_count(scale: float, epsilon: float, degree: int, k: int) -> int:
    """Newton iterations ``ceil(-log2(300 e^6 (d+1)^10 scale epsilon))``.

    Outside the guaranteed regime the expression is not positive; the Neumann
    depth is then used as the budget.
    """
    t = math.ceil(-math.log2(300 * E ** 6 * (degree + 1) ** 10 * abs(scale) * epsilon))
    return max(t, k, 1)


def project(x: np.ndarray) -> np.ndarray:
    return np.clip(x, -1.0, 1.0)


def newton_learn(fs: Sequence[TermSeries], beta: float, epsilon: float, params: ExpansionParameters,
                 allow_unguaranteed: bool = False, scale: Optional[float] = None,
                 iterations: Optional[int] = None, neumann: Optional[int] = None) -> LearnReport:
    """Solve ``F(x) = 0`` on ``[-1, 1]^M`` by projected Newton steps with a Neumann-series inverse.

    Parameters
    ----------
    fs : sequence of TermSeries
        One series per term with the measured shift embedded.
    beta : float
        Value substituted for the expansion variable.
    epsilon : float
        Target accuracy; sets the Neumann depth and the iteration budget.
    params : ExpansionParameters
        Provides the degree bound and truncation; the returned report carries
        the completed parameter bundle.
    allow_unguaranteed : bool
        Permit ``beta`` above the convergence threshold; the report is then
        marked as not guaranteed.
    scale : float, optional
        Leading Jacobian scale ``s`` with ``J ~ -s I``; defaults to ``beta``.
    iterations, neumann : int, optional
        Override the computed budgets.
    """
    if not fs:
        raise ValueError("no series given")
    if beta <= 0 or not (0 < epsilon < 1):
        raise ValueError("beta must be positive and epsilon in (0, 1)")
    s = beta if scale is None else scale
    guaranteed = abs(s) <= params.beta_c_newton
    if not guaranteed and not allow_unguaranteed:
        raise RegimeError(
            f"scale {abs(s):.3g} exceeds the convergence threshold {params.beta_c_newton:.3g}; "
            "pass allow_unguaranteed to run anyway")
    k = neumann if neumann is not None else neumann_depth(s, epsilon)
    t = iterations if iterations is not None else iteration_count(s, epsilon, params.degree_bound, k)
    params = ExpansionParameters(params.degree_bound, params.truncation, k, t)

    x = np.zeros(len(fs))
    history = [x.copy()]
    ran = 0
    for it in range(1, t + 1):
        fx = evaluate_all(fs, x, beta)
        if not np.all(np.isfinite(fx)):
            raise NumericError("non-finite residual", it)
        a = evaluate_jacobian(fs, x, beta).matrix / s
        # sum_{k<K} (I + J/s)^k F via repeated sparse products
        term = fx.copy()
        acc = fx.copy()
        for _ in range(k - 1):
            term = term + a @ term
            acc += term
        step = acc / s
        if not np.all(np.isfinite(step)):
            raise NumericError("non-finite Newton step", it)
        new = project(x + step)
        ran = it
        moved = np.max(np.abs(new - x))
        x = new
        history.append(x.copy())
        if moved < STEP_TOLERANCE:
            break
    residual = float(np.max(np.abs(evaluate_all(fs, x, beta))))
    return LearnReport(tuple(fs[0].variables), x, ran, residual, params, guaranteed, history=history)


def sample_size(beta: float, epsilon: float, delta: float, degree: int, n_terms: int, constant: float = 8.0) -> int:
    """Total Gibbs-state copies ``ceil(C (d+1) / (beta eps)^2 * ln(2M / delta))``."""
    if beta <= 0 or not (0 < epsilon < 1) or not (0 < delta < 1) or n_terms < 1:
        raise ValueError("need beta > 0, epsilon and delta in (0, 1), and at least one term")
    return math.ceil(constant * (degree + 1) / (beta ** 2 * epsilon ** 2) * math.log(2 * n_terms / delta))


def contraction_bound(error_inf: float, beta: float, epsilon: float, params: ExpansionParameters) -> float:
    """Bound on the next-iterate error given the current one (noiseless shifts)."""
    d = params.degree_bound
    return 6 * epsilon + 12.5 * E ** 2 * beta * (d + 1) ** 6 * params.tau ** 2 * error_inf ** 2


def decay_steps(c: float, d: float) -> int:
    """Steps after which ``z_{n+1} <= c + d z_n^2`` started at ``z_0 <= 1/(2d)`` is below ``3c``."""
    if c <= 0 or d <= 0 or c * d > 0.25:
        raise ValueError("need c, d > 0 with c*d <= 1/4")
    return max(0, math.ceil(math.log2(1 / (c * d))) - 1)
