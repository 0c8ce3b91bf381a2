"""Exact cluster derivatives of the log-partition function.

For a cluster ``W`` of weight ``m + 1`` the normalized derivative
``D_W log Tr exp(-sum_a x_a E_a) / W!`` at ``x = 0`` is a rational number.  It is
obtained from univariate restrictions ``g(alpha; z) = r(z alpha)`` for integer
``z`` in the multiplicity box, whose log-derivatives at zero are computed by
the ``h_t`` recursion and combined with binomial finite-difference weights.
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction
from itertools import product
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .clusters import Cluster
from .hamiltonian import HamiltonianSpec
from .pauli import PhasedPauli, faithful_representation

_DENSE_MAX_QUBITS = 12


def _rotate(re: int, im: int, e: int) -> Tuple[int, int]:
    e %= 4
    if e == 0:
        return re, im
    if e == 1:
        return -im, re
    if e == 2:
        return -re, -im
    return im, -re


def _trace_powers_words(rep: Sequence[PhasedPauli], z: Sequence[int], order: int) -> List[int]:
    """``Tr(P^k) / 2^r`` for ``k = 0..order`` by expanding products of Pauli words."""
    terms = []
    for img, zj in zip(rep, z):
        if zj:
            p = img.pauli
            popxz = bin(p.x & p.z).count("1")
            terms.append((zj, img.phase, p.x, p.z, popxz))
    out = [1]
    if not terms:
        return out + [0] * order
    # coefficients are Gaussian integers attached to X^x Z^z words
    state: Dict[Tuple[int, int], Tuple[int, int]] = {(0, 0): (1, 0)}
    for _ in range(order):
        nxt: Dict[Tuple[int, int], Tuple[int, int]] = {}
        for (x1, z1), (re, im) in state.items():
            for zj, ph, x2, z2, popxz in terms:
                # (X^x1 Z^z1)(i^ph i^popxz X^x2 Z^z2) = i^(ph+popxz) (-1)^{|z1&x2|} X^(x1^x2) Z^(z1^z2)
                e = ph + popxz + 2 * bin(z1 & x2).count("1")
                r2, i2 = _rotate(re * zj, im * zj, e)
                key = (x1 ^ x2, z1 ^ z2)
                old = nxt.get(key)
                if old is None:
                    nxt[key] = (r2, i2)
                else:
                    nxt[key] = (old[0] + r2, old[1] + i2)
        state = {k: v for k, v in nxt.items() if v != (0, 0)}
        re, im = state.get((0, 0), (0, 0))
        if im != 0:
            raise ArithmeticError("trace of a Hermitian power has an imaginary part")
        out.append(re)
    return out


_FLOAT_EXACT = 1 << 52


def _dense_images(rep: Sequence[PhasedPauli]) -> np.ndarray:
    return np.stack([img.to_matrix() for img in rep])


def _trace_powers_dense(rep: Sequence[PhasedPauli], z: Sequence[int], order: int, mats=None) -> List[int]:
    """``Tr(P^k) / 2^r`` by powering the dense Gaussian-integer matrix of ``P``.

    Complex double arithmetic is exact here because every partial sum is an
    integer bounded by ``(sum z)^order``, which callers keep below ``2^52``.
    """
    if mats is None:
        mats = _dense_images(rep)
    dim = mats.shape[1]
    mat = np.tensordot(np.asarray(z, dtype=float), mats, axes=1)
    cur = mat
    out = [1]
    for k in range(1, order + 1):
        if k > 1:
            cur = cur @ mat
        tr = np.trace(cur)
        re = int(round(tr.real))
        if abs(tr.imag) > 0.5 or re % dim:
            raise ArithmeticError("non-integral normalized trace")
        out.append(re // dim)
    return out


def _dense_ok(rep: Sequence[PhasedPauli], z: Sequence[int], order: int) -> bool:
    r = rep[0].pauli.n_qubits
    return r <= _DENSE_MAX_QUBITS and sum(abs(v) for v in z) ** order * (1 << r) < _FLOAT_EXACT


def trace_powers(rep: Sequence[PhasedPauli], z: Sequence[int], order: int, method: str = "auto",
                 mats=None) -> List[int]:
    """Normalized traces ``Tr((sum_j z_j E_j)^k) / 2^r`` for ``k = 0..order`` as exact integers."""
    if method == "auto":
        method = "dense" if _dense_ok(rep, z, order) else "words"
    if method == "dense":
        if not _dense_ok(rep, z, order):
            raise ValueError("dense powering would lose exactness for these inputs")
        return _trace_powers_dense(rep, z, order, mats)
    if method == "words":
        return _trace_powers_words(rep, z, order)
    raise ValueError(f"unknown method {method!r}")


def g_coefficients(rep: Sequence[PhasedPauli], z: Sequence[int], order: int, method: str = "auto",
                   mats=None) -> List[Fraction]:
    """Coefficients ``[alpha^k] g`` for ``k = 0..order``, where ``g(alpha) = Tr exp(-alpha P) / 2^r``."""
    if len(rep) != len(z):
        raise ValueError("z must have one entry per operator")
    if any(v < 0 for v in z):
        raise ValueError("z entries must be non-negative")
    traces = trace_powers(rep, z, order, method, mats)
    return [Fraction((-1) ** k * t, math.factorial(k)) for k, t in enumerate(traces)]


def _h_rows(G: Sequence[int], m: int) -> List[List[int]]:
    rows = [[(k + 1) * G[k + 1] for k in range(m + 1)]]
    for t in range(1, m + 1):
        prev = rows[-1]
        cur = []
        for k in range(m - t + 1):
            acc = 0
            for j in range(k + 1):
                acc += (j + 1) * prev[j + 1] * G[k - j] - t * (k - j + 1) * prev[j] * G[k - j + 1]
            cur.append(acc)
        rows.append(cur)
    return rows


def h_table(g: Sequence[Fraction], m: int) -> Tuple[List[List[int]], int]:
    """Scaled integer table of the ``h_t`` recursion.

    Returns ``(rows, d)`` where ``rows[t][k] / d**(t+1) == [alpha^k] h_t`` for
    ``k <= m - t`` and ``d`` is the common denominator of ``g``.
    """
    if len(g) < m + 2:
        raise ValueError(f"need g through alpha^{m + 1}")
    g = [Fraction(c) for c in g[: m + 2]]
    if g[0] != 1:
        raise ValueError("g must have constant term 1")
    d = 1
    for c in g:
        d = d * c.denominator // math.gcd(d, c.denominator)
    return _h_rows([int(c * d) for c in g], m), d


def h_constant_term(g: Sequence[Fraction], m: int) -> Fraction:
    """``[alpha^0] h_m``, i.e. the ``(m+1)``-th derivative of ``log g`` at zero."""
    rows, d = h_table(g, m)
    return Fraction(rows[m][0], d ** (m + 1))


class _Memo:
    def __init__(self):
        self._data: Dict[tuple, Fraction] = {}
        self._lock = threading.Lock()

    def get(self, key):
        return self._data.get(key)

    def put(self, key, value):
        with self._lock:
            self._data.setdefault(key, value)

    def clear(self):
        with self._lock:
            self._data.clear()

    def __len__(self):
        return len(self._data)


_memo = _Memo()


def clear_cache() -> None:
    _memo.clear()


def _batched_traces(mats: np.ndarray, zs: np.ndarray, order: int) -> np.ndarray:
    """Normalized traces of ``P_z^k`` for every row ``z`` of ``zs``; exact integers as objects."""
    dim = mats.shape[1]
    ps = np.tensordot(zs.astype(float), mats, axes=1)
    # Tr(P^k) = sum(P^a * (P^b)^T) with a + b = k, so powers up to ceil(order/2) suffice
    powers = [None, ps]
    for _ in range(2, (order + 1) // 2 + 1):
        powers.append(np.matmul(powers[-1], ps))
    out = np.empty((len(zs), order + 1), dtype=object)
    out[:, 0] = 1
    for k in range(1, order + 1):
        a, b = (k + 1) // 2, k // 2
        if b == 0:
            tr = np.trace(powers[a], axis1=1, axis2=2)
        else:
            tr = np.einsum("nij,nji->n", powers[a], powers[b])
        re = np.rint(tr.real).astype(np.int64)
        if np.any(np.abs(tr.imag) > 0.5) or np.any(re % dim):
            raise ArithmeticError("non-integral normalized trace")
        out[:, k] = [int(v) for v in re // dim]
    return out


def derivative_from_representation(rep: Sequence[PhasedPauli], mults: Sequence[int],
                                   method: str = "auto") -> Fraction:
    """Normalized mixed derivative for operators ``rep`` taken ``mults`` times each.

    Every ``g`` is carried over the fixed denominator ``(m+1)!`` so the whole
    z-sum stays in integers over ``((m+1)!)^(m+1)``; one reduction at the end.
    The h recursion runs elementwise over all box points at once.
    """
    n_total = sum(mults)
    if n_total < 1:
        raise ValueError("cluster weight must be positive")
    m = n_total - 1
    zs = np.array([z for z in product(*(range(mu + 1) for mu in mults)) if any(z)], dtype=np.int64)
    top = [int(v) for v in zs.sum(axis=1).max(keepdims=True)] if len(zs) else [0]
    if method == "words" or not _dense_ok(rep, top, m + 1):
        traces = np.array([trace_powers(rep, z, m + 1, "words") for z in zs.tolist()], dtype=object)
    else:
        traces = _batched_traces(_dense_images(rep), zs, m + 1)
    d = math.factorial(m + 1)
    G = [traces[:, k] * ((-1) ** k * (d // math.factorial(k))) for k in range(m + 2)]
    h = _h_rows(G, m)[m][0]
    weights = np.ones(len(zs), dtype=object)
    for j, mu in enumerate(mults):
        weights = weights * np.array([math.comb(mu, int(v)) for v in zs[:, j]], dtype=object)
    signs = np.where((zs.sum(axis=1) + m + 1) % 2 == 1, -1, 1).astype(object)
    acc = int(np.sum(signs * weights * h)) if len(zs) else 0
    denom = d ** (m + 1) * d
    for mu in mults:
        denom *= math.factorial(mu)
    return Fraction(acc, denom)


def cluster_derivative(w: Cluster, h: HamiltonianSpec, method: str = "auto", use_cache: bool = True) -> Fraction:
    """Exact normalized cluster derivative ``D_W log Tr exp(-sum x_a E_a) / W!`` at ``x = 0``.

    Clusters are not checked for connectivity; disconnected clusters give 0.
    """
    items = sorted(w.items, key=lambda it: h.index(it[0]))
    ops = [h.operator(a) for a, _ in items]
    mults = [mu for _, mu in items]
    rep = faithful_representation(ops)
    key = (tuple((p.phase, p.pauli.n_qubits, p.pauli.x, p.pauli.z) for p in rep), tuple(mults))
    if use_cache:
        hit = _memo.get(key)
        if hit is not None:
            return hit
    value = derivative_from_representation(rep, mults, method)
    if use_cache:
        _memo.put(key, value)
    return value
