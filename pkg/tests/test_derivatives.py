import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mp_derivative, random_hamiltonian
from hamlearn.clusters import Cluster, enumerate_clusters
from hamlearn.derivatives import (cluster_derivative, clear_cache, derivative_from_representation,
                                  g_coefficients, h_constant_term, trace_powers)
from hamlearn.hamiltonian import HamiltonianSpec, build_dual_graph
from hamlearn.pauli import PauliString, faithful_representation


def single(tokens_list):
    return HamiltonianSpec.from_terms(1, [(f"t{i}", [t], 1.0) for i, t in enumerate(tokens_list)])


def test_log_cosh_coefficients():
    # log 2cosh x = log 2 + x^2/2 - x^4/12 + x^6/45 - 17 x^8/2520
    h = single(["Z0"])
    want = {1: Fraction(0), 2: Fraction(1, 2), 3: Fraction(0), 4: Fraction(-1, 12), 6: Fraction(1, 45),
            8: Fraction(-17, 2520)}
    for w, v in want.items():
        assert cluster_derivative(Cluster([("t0", w)]), h) == v


def test_noncommuting_pair_from_radial_form():
    # Tr exp(-(aX + bZ)) = 2cosh(sqrt(a^2+b^2)): the a^2 b^2 coefficient of -(a^2+b^2)^2/12 is -1/6
    h = single(["Z0", "X0"])
    assert cluster_derivative(Cluster([("t0", 2), ("t1", 2)]), h) == Fraction(-1, 6)
    # (a^2+b^2)^3/45 gives 3/45 for a^4 b^2
    assert cluster_derivative(Cluster([("t0", 4), ("t1", 2)]), h) == Fraction(3, 45)


def test_disconnected_cluster_vanishes():
    h = HamiltonianSpec.from_terms(2, [("a", ["Z0"], 1.0), ("b", ["X1"], 1.0)])
    assert cluster_derivative(Cluster([("a", 2), ("b", 2)]), h) == 0


def test_commuting_cluster_is_cumulant():
    # ZZ and Z0 commute: log Tr exp(-a Z0 - b Z0Z1) = log 4 + log cosh a + log cosh b
    h = HamiltonianSpec.from_terms(2, [("a", ["Z0"], 1.0), ("b", ["Z0", "Z1"], 1.0)])
    assert cluster_derivative(Cluster([("a", 2), ("b", 2)]), h) == 0
    assert cluster_derivative(Cluster([("b", 2)]), h) == Fraction(1, 2)


def test_h_recursion_matches_log_series():
    # g = 1 + x: log g has (m+1)-th derivative (-1)^m m!
    g = [Fraction(1), Fraction(1)] + [Fraction(0)] * 8
    for m in range(6):
        assert h_constant_term(g, m) == (-1) ** m * math.factorial(m)


def test_g_coefficients_of_single_z():
    rep = faithful_representation([PauliString.from_tokens(["Z0"], 1)])
    # Tr exp(-alpha Z) / 2 = cosh(alpha)
    assert g_coefficients(rep, [1], 4) == [1, 0, Fraction(1, 2), 0, Fraction(1, 24)]
    assert g_coefficients(rep, [2], 2) == [1, 0, 2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_word_and_dense_tracers_agree(seed, order):
    rng = np.random.default_rng(seed)
    h = random_hamiltonian(rng, 2, 3, max_weight=2, local=False)
    rep = faithful_representation(h.operators)
    z = [int(v) for v in rng.integers(0, 3, size=len(rep))]
    assert trace_powers(rep, z, order, "words") == trace_powers(rep, z, order, "dense")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_methods_agree_on_derivative(seed):
    rng = np.random.default_rng(seed)
    h = random_hamiltonian(rng, 2, 3, max_weight=2, local=False)
    rep = faithful_representation(h.operators)
    mults = [int(v) for v in rng.integers(1, 3, size=len(rep))]
    assert derivative_from_representation(rep, mults, "words") == derivative_from_representation(rep, mults)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_qubit_relabeling_invariance(seed):
    rng = np.random.default_rng(seed)
    h = random_hamiltonian(rng, 3, 3, max_weight=2, local=False)
    perm = rng.permutation(3)
    moved = HamiltonianSpec.from_terms(3, [
        (t.term_id, [f"{t.operator.letter(q)}{perm[q]}" for q in t.operator.support], 1.0) for t in h.terms])
    cluster = Cluster((a, int(rng.integers(1, 3))) for a in h.term_ids)
    assert cluster_derivative(cluster, h, use_cache=False) == cluster_derivative(cluster, moved, use_cache=False)


@pytest.mark.parametrize("seed", range(4))
def test_against_high_precision_differences(seed):
    rng = np.random.default_rng(100 + seed)
    h = random_hamiltonian(rng, 2, 3, max_weight=2, local=False)
    g = build_dual_graph(h)
    clear_cache()
    for w in range(1, 5):
        for c in enumerate_clusters(g, h.term_ids[0], w):
            exact = float(cluster_derivative(c, h))
            ref = mp_derivative(h, c)
            assert abs(exact - ref) <= 1e-6 * abs(ref) + 1e-12


def test_cache_hit_returns_same_value():
    h = single(["Z0", "X0"])
    c = Cluster([("t0", 2), ("t1", 2)])
    assert cluster_derivative(c, h) is cluster_derivative(c, h)
