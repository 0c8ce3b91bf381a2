import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain_hamiltonian, random_hamiltonian
from hamlearn.hamiltonian import (HamiltonianSpec, SpecParseError, build_dual_graph, format_hamiltonian,
                                  greedy_coloring, parse_hamiltonian)

SPEC = """\
# two-qubit example
qubits 2
beta 0.25
term zz 0.5 Z0 Z1   # coupling
term x0 -0.3 X0
"""


def test_parse_example():
    h = parse_hamiltonian(SPEC)
    assert h.n_qubits == 2 and h.beta == 0.25
    assert h.term_ids == ["zz", "x0"]
    assert h.operator("zz").to_label() == "ZZ"
    np.testing.assert_allclose(h.coefficients, [0.5, -0.3])


@pytest.mark.parametrize("text, line", [
    ("qubits 2\nbeta 0.1\nterm a 2.0 Z0\n", 3),
    ("qubits 2\nbeta 0.1\nterm a 0.5 Z7\n", 3),
    ("qubits 2\nbeta x\n", 2),
    ("qubits 2\nbeta 0.1\nterm a 0.5 Z0\nterm b 0.1 Z0\n", 4),
    ("qubits 2\nbeta 0.1\nterm a 0.5 Z0\nterm a 0.1 X0\n", 4),
    ("qubits 2\nbeta 0.1\nfield 3\n", 3),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(SpecParseError) as info:
        parse_hamiltonian(text)
    assert info.value.line == line


def test_missing_header():
    with pytest.raises(SpecParseError):
        parse_hamiltonian("beta 0.1\n")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_format_parse_round_trip(seed):
    h = random_hamiltonian(np.random.default_rng(seed), 4, 6, max_weight=3, beta=0.3)
    assert parse_hamiltonian(format_hamiltonian(h)) == h


def test_constructor_validation():
    with pytest.raises(ValueError):
        HamiltonianSpec.from_terms(1, [("a", ["Z0"], 0.1), ("b", ["Z0"], 0.2)])
    with pytest.raises(ValueError):
        HamiltonianSpec.from_terms(1, [("a", [], 0.1)])
    with pytest.raises(ValueError):
        HamiltonianSpec.from_terms(1, [("a", ["Z0"], 1.5)])


def test_dual_graph_chain():
    h = chain_hamiltonian(4, 0, 0.1)
    g = build_dual_graph(h)
    assert sorted(g.neighbors("zz1")) == sorted(["zz0", "zz2", "x1", "x2"])
    assert sorted(g.neighbors("x0")) == ["zz0"]
    assert g.max_degree == 4
    assert g.distances_from("x0")["x3"] == 4


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_dual_graph_matches_pairwise_overlap(seed):
    h = random_hamiltonian(np.random.default_rng(seed), 5, 8, max_weight=3, local=False)
    g = build_dual_graph(h)
    for a in h.term_ids:
        want = {b for b in h.term_ids if b != a and h.operator(a).support_mask & h.operator(b).support_mask}
        assert set(g.neighbors(a)) == want


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_greedy_coloring_is_proper(seed):
    h = random_hamiltonian(np.random.default_rng(seed), 6, 10, max_weight=3, local=False)
    g = build_dual_graph(h)
    col = greedy_coloring(g)
    for a, b in g.edges():
        assert col.colors[a] != col.colors[b]
    assert col.color_count <= g.max_degree + 1


def test_to_matrix_is_hermitian():
    h = parse_hamiltonian(SPEC)
    m = h.to_matrix()
    np.testing.assert_allclose(m, m.conj().T)
