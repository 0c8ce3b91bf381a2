"""Exact algebra of n-qubit Pauli strings in symplectic form.

A Pauli string on ``n`` qubits is stored as two integer bit masks ``x`` and
``z``; bit ``i`` of each mask refers to qubit ``i``.  Qubit ``i`` carries X if
only its x bit is set, Z if only its z bit is set and Y if both are set.
Phases are integers mod 4 standing for powers of the imaginary unit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

_LETTERS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_PHASE_VALUES = (1, 1j, -1, -1j)


class PauliError(ValueError):
    """Raised on malformed Pauli input or mismatched register sizes."""


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True, order=True)
class PauliString:
    """Phase-free tensor product of single-qubit Paulis.

    Parameters
    ----------
    n_qubits : int
        Register size.
    x, z : int
        Bit masks; bit ``i`` describes qubit ``i``.
    """

    n_qubits: int
    x: int = 0
    z: int = 0

    def __post_init__(self):
        if self.n_qubits < 0:
            raise PauliError("n_qubits must be non-negative")
        limit = 1 << self.n_qubits
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise PauliError("bit masks exceed the register size")

    @classmethod
    def from_bits(cls, x_bits: Sequence[int], z_bits: Sequence[int]) -> "PauliString":
        if len(x_bits) != len(z_bits):
            raise PauliError("x and z bit vectors differ in length")
        x = sum(1 << i for i, b in enumerate(x_bits) if b)
        z = sum(1 << i for i, b in enumerate(z_bits) if b)
        return cls(len(x_bits), x, z)

    @classmethod
    def from_tokens(cls, tokens: Union[str, Iterable[str]], n_qubits: int) -> "PauliString":
        """Build from tokens such as ``"X0 Z3"``."""
        if isinstance(tokens, str):
            tokens = tokens.split()
        x = z = 0
        seen = set()
        for tok in tokens:
            letter, idx = tok[:1].upper(), tok[1:]
            if letter not in _BITS or not idx.isdigit():
                raise PauliError(f"bad Pauli token {tok!r}")
            q = int(idx)
            if q >= n_qubits:
                raise PauliError(f"qubit index {q} out of range for {n_qubits} qubits")
            if q in seen:
                raise PauliError(f"duplicate qubit index {q}")
            seen.add(q)
            bx, bz = _BITS[letter]
            x |= bx << q
            z |= bz << q
        return cls(n_qubits, x, z)

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(n_qubits, 0, 0)

    @property
    def x_bits(self) -> tuple:
        return tuple((self.x >> i) & 1 for i in range(self.n_qubits))

    @property
    def z_bits(self) -> tuple:
        return tuple((self.z >> i) & 1 for i in range(self.n_qubits))

    @property
    def support_mask(self) -> int:
        return self.x | self.z

    @property
    def support(self) -> tuple:
        m = self.support_mask
        return tuple(i for i in range(self.n_qubits) if (m >> i) & 1)

    @property
    def weight(self) -> int:
        return _popcount(self.support_mask)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def letter(self, qubit: int) -> str:
        return _LETTERS[((self.x >> qubit) & 1, (self.z >> qubit) & 1)]

    def to_tokens(self) -> str:
        return " ".join(f"{self.letter(q)}{q}" for q in self.support)

    def to_label(self) -> str:
        return "".join(self.letter(q) for q in range(self.n_qubits))

    def to_matrix(self) -> np.ndarray:
        """Dense matrix; qubit 0 is the leftmost tensor factor."""
        out = np.ones((1, 1), dtype=complex)
        for q in range(self.n_qubits):
            out = np.kron(out, _SINGLE[self.letter(q)])
        return out

    def __repr__(self) -> str:
        return f"PauliString({self.to_label() or '<empty>'})"


class PhasedPauli(NamedTuple):
    """A Pauli string times ``i**phase``."""

    phase: int
    pauli: PauliString

    def to_matrix(self) -> np.ndarray:
        return _PHASE_VALUES[self.phase % 4] * self.pauli.to_matrix()

    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0


def _check_same(p: PauliString, q: PauliString) -> None:
    if p.n_qubits != q.n_qubits:
        raise PauliError(f"register mismatch: {p.n_qubits} vs {q.n_qubits} qubits")


def pauli_product(p: PauliString, q: PauliString) -> tuple:
    """Return ``(phase, r)`` with ``p @ q == i**phase * r``."""
    _check_same(p, q)
    x, z = p.x ^ q.x, p.z ^ q.z
    # write P = i^{|x&z|} X^x Z^z; moving Z^{z_p} past X^{x_q} costs (-1)^{|z_p & x_q|}
    e = _popcount(p.x & p.z) + _popcount(q.x & q.z) + 2 * _popcount(p.z & q.x) - _popcount(x & z)
    return e % 4, PauliString(p.n_qubits, x, z)


def phased_product(a: PhasedPauli, b: PhasedPauli) -> PhasedPauli:
    e, r = pauli_product(a.pauli, b.pauli)
    return PhasedPauli((a.phase + b.phase + e) % 4, r)


def commutes(p: PauliString, q: PauliString) -> bool:
    """True iff the symplectic form of ``p`` and ``q`` is even."""
    _check_same(p, q)
    return (_popcount(p.x & q.z) + _popcount(p.z & q.x)) % 2 == 0


def _as_phased(op) -> PhasedPauli:
    if isinstance(op, PhasedPauli):
        return op
    if isinstance(op, PauliString):
        return PhasedPauli(0, op)
    raise TypeError(f"expected a Pauli operator, got {type(op).__name__}")


def word_phase(word: Sequence) -> tuple:
    """Multiply a word out; return ``(phase, pauli)`` or ``None`` for an empty word."""
    if not word:
        return None
    acc = _as_phased(word[0])
    for op in word[1:]:
        nxt = _as_phased(op)
        _check_same(acc.pauli, nxt.pauli)
        acc = phased_product(acc, nxt)
    return acc


def normalized_trace_of_word(word: Sequence) -> complex:
    """``Tr(w_1 w_2 ... w_k) / 2**n`` as an exact value in {0, +-1, +-i}."""
    acc = word_phase(word)
    if acc is None:
        return 1
    if not acc.pauli.is_identity():
        return 0
    return _PHASE_VALUES[acc.phase]


def _symplectic(p: PauliString) -> int:
    # X block occupies the low bits so that pivots favour low qubits, X first
    return p.x | (p.z << p.n_qubits)


def faithful_representation(ops: Sequence[PauliString]) -> list:
    """Map Pauli operators onto a small register, preserving every word trace.

    The operators are reduced over GF(2) to find a multiplicative basis.  Basis
    element ``t`` is sent to ``Z_t`` times X on every earlier basis qubit it
    anticommutes with, which reproduces the commutation table.  Each input
    operator is then rebuilt as the same phase-tagged product of images.

    Returns
    -------
    list of PhasedPauli
        One image per input, all on ``r`` qubits where ``r`` is the rank.
    """
    ops = list(ops)
    if not ops:
        raise PauliError("need at least one operator")
    n = ops[0].n_qubits
    for p in ops:
        if p.n_qubits != n:
            raise PauliError("operators act on different registers")

    rows = []  # (pivot bit, reduced vector, generator combination mask)
    generators = []
    combos = []
    for p in ops:
        v = _symplectic(p)
        combo = 0
        for pivot, vec, c in rows:
            if (v >> pivot) & 1:
                v ^= vec
                combo ^= c
        if v:
            j = len(generators)
            generators.append(p)
            combo ^= 1 << j
            pivot = (v & -v).bit_length() - 1
            # keep rows fully reduced on the new pivot
            rows = [
                (pv, vec ^ v, c ^ combo) if (vec >> pivot) & 1 else (pv, vec, c)
                for pv, vec, c in rows
            ]
            rows.append((pivot, v, combo))
            combos.append(1 << j)
        else:
            combos.append(combo)

    r = len(generators)
    images = []
    for t, g in enumerate(generators):
        xmask = 0
        for s in range(t):
            if not commutes(g, generators[s]):
                xmask |= 1 << s
        images.append(PauliString(r, xmask, 1 << t))

    out = []
    for p, combo in zip(ops, combos):
        idx = [j for j in range(r) if (combo >> j) & 1]
        orig = word_phase([generators[j] for j in idx])
        if orig.pauli != p:
            raise AssertionError("basis reconstruction failed")
        phase = (-orig.phase) % 4
        img = word_phase([images[j] for j in idx])
        out.append(PhasedPauli((phase + img.phase) % 4, img.pauli))
    return out
