"""Learning Pauli-term Hamiltonians from high-temperature Gibbs states or short-time dynamics."""

from .estimators import DynamicsHamiltonianLearner, GibbsHamiltonianLearner, MRFParameterLearner
from .hamiltonian import HamiltonianSpec, build_dual_graph, format_hamiltonian, parse_hamiltonian
from .mrf import MrfSpec, learn_mrf, sample_mrf
from .pauli import PauliString
from .series import ExpansionParameters, RegimeError, build_all_series, truncation_order
from .solver import LearnReport, newton_learn

__version__ = "0.1.0"

__all__ = [
    "DynamicsHamiltonianLearner",
    "ExpansionParameters",
    "GibbsHamiltonianLearner",
    "HamiltonianSpec",
    "LearnReport",
    "MRFParameterLearner",
    "MrfSpec",
    "PauliString",
    "RegimeError",
    "build_all_series",
    "build_dual_graph",
    "format_hamiltonian",
    "learn_mrf",
    "newton_learn",
    "parse_hamiltonian",
    "sample_mrf",
    "truncation_order",
]
