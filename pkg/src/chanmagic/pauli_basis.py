"""Pauli-expectation vectors of multi-qubit operators.

Index order: base-4 big-endian over qubits (qubit 0 is the most significant
digit) with digit order I=0, X=1, Y=2, Z=3.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

# digit from (x, z) bits
_DIGIT = np.array([[0, 3], [1, 2]], dtype=np.int64)


@lru_cache(maxsize=None)
def xz_index_tables(nq: int):
    """Arrays (index[x, z], ypow[x, z]) for integers x, z < 2^nq.

    ypow = popcount(x & z), so that P_index = i^ypow X^x Z^z.
    """
    d = 2 ** nq
    xs = np.arange(d)[:, None]
    zs = np.arange(d)[None, :]
    idx = np.zeros((d, d), dtype=np.int64)
    ypow = np.zeros((d, d), dtype=np.int64)
    for q in range(nq):
        shift = nq - 1 - q
        xb = (xs >> shift) & 1
        zb = (zs >> shift) & 1
        idx = idx * 4 + _DIGIT[xb, zb]
        ypow = ypow + (xb & zb)
    return idx, ypow


@lru_cache(maxsize=None)
def _hadamard(nq: int) -> np.ndarray:
    h = np.array([[1.0]])
    h1 = np.array([[1.0, 1.0], [1.0, -1.0]])
    for _ in range(nq):
        h = np.kron(h, h1)
    return h


def pauli_vector(rho: np.ndarray) -> np.ndarray:
    """Real vector of Tr[P rho] over all Paulis P in canonical index order."""
    rho = np.asarray(rho)
    d = rho.shape[0]
    nq = int(round(np.log2(d)))
    w = np.arange(d)
    # F[x, w] = rho[w, w ^ x]
    f = rho[w[None, :], w[None, :] ^ w[:, None]]
    t = f @ _hadamard(nq)
    idx, ypow = xz_index_tables(nq)
    vals = (1j ** ypow) * t
    out = np.empty(d * d)
    out[idx.ravel()] = vals.real.ravel()
    return out


def density_from_pauli_vector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    d = int(round(np.sqrt(v.size)))
    nq = int(round(np.log2(d)))
    idx, ypow = xz_index_tables(nq)
    t = v[idx] * (1j ** (-ypow))
    f = t @ _hadamard(nq) / d
    w = np.arange(d)
    rho = np.zeros((d, d), dtype=complex)
    rho[w[None, :], w[None, :] ^ w[:, None]] = f
    return rho


def pauli_label(index: int, nq: int) -> str:
    out = []
    for q in range(nq):
        out.append("IXYZ"[(index >> (2 * (nq - 1 - q))) & 3])
    return "".join(out)


def pauli_index(label: str) -> int:
    v = 0
    for c in label:
        v = v * 4 + "IXYZ".index(c)
    return v


def z_type_indices(nq: int) -> np.ndarray:
    """Indices of Paulis built only from I and Z, identity first."""
    out = []
    for zmask in range(2 ** nq):
        v = 0
        for q in range(nq):
            v = v * 4 + (3 if (zmask >> (nq - 1 - q)) & 1 else 0)
        out.append(v)
    return np.array(out, dtype=np.int64)
