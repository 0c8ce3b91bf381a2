"""Self-contained oracle checks run by ``hamlearn verify``."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional

import numpy as np

from .analysis import hard_instance, kl_grid
from .clusters import Cluster, enumerate_clusters, regular_tree, tree_cluster_count
from .derivatives import cluster_derivative
from .hamiltonian import DualGraph, HamiltonianSpec, build_dual_graph
from .mrf import MrfSpec, estimate_edges, exact_conditional
from .qsim import exact_expectations, hamiltonian_matrix
from .realtime import build_dynamics_series, choose_probe, exact_dynamics_values
from .series import build_all_series, evaluate_all


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{self.suite}\t{self.name}\t{'PASS' if self.passed else 'FAIL'}\t{self.detail}"


def _brute_clusters(g: DualGraph, root, weight: int) -> set:
    out = set()
    for combo in itertools.combinations_with_replacement(g.nodes, weight):
        if root not in combo:
            continue
        c = Cluster((v, 1) for v in combo)
        if c.is_connected(g):
            out.add(c)
    return out


def suite_clusters(fault: float = 0.0) -> List[CheckResult]:
    res = []
    for d in (2, 3):
        tree = regular_tree(d, 6)
        for w in range(1, 6):
            got = len(enumerate_clusters(tree, 0, w))
            want = tree_cluster_count(d, w)
            res.append(CheckResult("clusters", f"tree_d{d}_w{w}", got == want, f"{got} vs {want}"))
    cycle = DualGraph.from_edges(list(range(5)), [(i, (i + 1) % 5) for i in range(5)])
    for w in range(1, 5):
        got = set(enumerate_clusters(cycle, 0, w))
        want = _brute_clusters(cycle, 0, w)
        res.append(CheckResult("clusters", f"cycle5_w{w}", got == want, f"{len(got)} vs {len(want)}"))
    return res


def _single_qubit(terms) -> HamiltonianSpec:
    return HamiltonianSpec.from_terms(1, [(f"t{i}", [tok], 1.0) for i, tok in enumerate(terms)], 1.0)


def suite_derivatives(fault: float = 0.0) -> List[CheckResult]:
    # log 2cosh r with r^2 = a^2 + b^2 supplies every reference value
    h = _single_qubit(["Z0", "X0"])
    cases = [
        (Cluster([("t0", 1)]), Fraction(0)),
        (Cluster([("t0", 2)]), Fraction(1, 2)),
        (Cluster([("t0", 4)]), Fraction(-1, 12)),
        (Cluster([("t0", 2), ("t1", 2)]), Fraction(-1, 6)),
        (Cluster([("t0", 1), ("t1", 1)]), Fraction(0)),
        (Cluster([("t0", 6)]), Fraction(1, 45)),
    ]
    res = []
    for cluster, want in cases:
        got = cluster_derivative(cluster, h, use_cache=False) + Fraction(fault)
        res.append(CheckResult("derivatives", repr(cluster), got == want, f"{got} vs {want}"))
    return res


def suite_series(fault: float = 0.0) -> List[CheckResult]:
    res = []
    h = HamiltonianSpec.from_terms(3, [("zz0", ["Z0", "Z1"], 0.6), ("zz1", ["Z1", "Z2"], -0.4),
                                       ("x0", ["X0"], 0.5), ("x1", ["X1"], 0.3), ("x2", ["X2"], -0.7)], 1e-2)
    g = build_dual_graph(h)
    exact = exact_expectations(h)
    for m_hat in (2, 4):
        fs = build_all_series(h, g, m_hat, shifts=exact)
        err = float(np.max(np.abs(evaluate_all(fs, h.coefficients, h.beta)))) + fault
        bound = 12 * 3 ** (m_hat + 1) * h.beta ** (m_hat + 1)
        res.append(CheckResult("series", f"chain3_m{m_hat}", err <= bound, f"{err:.3g} <= {bound:.3g}"))
    single = HamiltonianSpec.from_terms(1, [("z", ["Z0"], 1.0)], 1.0)
    fs = build_all_series(single, build_dual_graph(single), 5)
    want = {1: Fraction(-1), 3: Fraction(1, 3), 5: Fraction(-2, 15)}
    got = {mono.degree: mono.coefficient for mono in fs[0].monomials}
    res.append(CheckResult("series", "tanh", got == want, str(got)))
    return res


def suite_dynamics(fault: float = 0.0) -> List[CheckResult]:
    lam, t = 0.37, 0.21
    h = HamiltonianSpec.from_terms(1, [("z", ["Z0"], lam)], 1.0)
    val = float(exact_dynamics_values(h, t)[0]) + fault
    want = 2 * math.sin(2 * t * lam)
    res = [CheckResult("dynamics", "single_term", abs(val - want) < 1e-10, f"{val:.12g} vs {want:.12g}")]
    f = build_dynamics_series(h, build_dual_graph(h), "z", 7)
    coeffs = {mono.degree: mono.coefficient for mono in f.monomials}
    ref = {n: Fraction(2 * (-1) ** ((n - 1) // 2) * 2 ** n, math.factorial(n)) for n in (1, 3, 5, 7)}
    res.append(CheckResult("dynamics", "maclaurin", coeffs == ref, str(coeffs)))
    return res


def suite_analysis(fault: float = 0.0) -> List[CheckResult]:
    res = []
    for b, e, kl, bound, ok in kl_grid([0.1, 0.5, 1, 2, 4], [0.05, 0.25, 0.5]):
        res.append(CheckResult("analysis", f"kl_b{b}_e{e}", kl + fault <= bound, f"{kl:.4g} <= {bound:.4g}"))
    diag0 = np.real(np.diag(hamiltonian_matrix(hard_instance(1, 1.0, 0.5))))
    diag1 = np.real(np.diag(hamiltonian_matrix(hard_instance(1, 1.0, 0.5, 0))))
    res.append(CheckResult("analysis", "h0_spectrum", np.allclose(diag0, [-2, 0, 1, 1]), str(diag0)))
    res.append(CheckResult("analysis", "h1_spectrum", np.allclose(diag1, [-2, 0, 2, 0]), str(diag1)))
    return res


def suite_mrf(fault: float = 0.0) -> List[CheckResult]:
    spec = MrfSpec.from_edges(5, [("a", [0, 1], 0.5), ("b", [1, 2], -0.3), ("c", [0, 1, 2], 0.8),
                                  ("d", [2, 3, 4], -0.6), ("e", [4], 0.2)], 0.9)
    est = estimate_edges(spec, exact_conditional(spec))
    err = float(np.max(np.abs(est.estimates - spec.coefficients))) + fault
    return [CheckResult("mrf", "exact_conditionals", err < 1e-12, f"{err:.3g}")]


SUITES: Dict[str, Callable[..., List[CheckResult]]] = {
    "clusters": suite_clusters,
    "derivatives": suite_derivatives,
    "series": suite_series,
    "dynamics": suite_dynamics,
    "analysis": suite_analysis,
    "mrf": suite_mrf,
}


def run_suites(names: Optional[List[str]] = None, fault: Optional[str] = None) -> List[CheckResult]:
    """Run the named suites (all by default); ``fault`` perturbs the values of one suite."""
    names = names or list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites: {', '.join(unknown)}")
    out = []
    for n in names:
        out += SUITES[n](1e-3 if fault == n else 0.0)
    return out
