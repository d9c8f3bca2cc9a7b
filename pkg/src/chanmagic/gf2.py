"""Small dense linear algebra over GF(2) on numpy uint8 arrays."""
from __future__ import annotations

import numpy as np


def as_bits(a) -> np.ndarray:
    return (np.asarray(a) & 1).astype(np.uint8)


def rref(a, pivot_cols=None):
    """Row-reduced echelon form. Returns (R, pivots) with pivots the pivot columns."""
    r = as_bits(a).copy()
    rows, cols = r.shape
    pivots = []
    row = 0
    order = range(cols) if pivot_cols is None else pivot_cols
    for c in order:
        if row >= rows:
            break
        nz = np.nonzero(r[row:, c])[0]
        if nz.size == 0:
            continue
        p = row + nz[0]
        if p != row:
            r[[row, p]] = r[[p, row]]
        hit = np.nonzero(r[:, c])[0]
        hit = hit[hit != row]
        if hit.size:
            r[hit] ^= r[row]
        pivots.append(c)
        row += 1
    return r, pivots


def rank(a) -> int:
    a = as_bits(a)
    if a.size == 0:
        return 0
    return len(rref(a)[1])


def solve(a, b):
    """Particular solution x of a @ x = b (mod 2), or None if inconsistent.

    b may be a vector or a matrix of right-hand sides.
    """
    a = as_bits(a)
    b = as_bits(b)
    vec = b.ndim == 1
    if vec:
        b = b[:, None]
    m, n = a.shape
    aug = np.concatenate([a, b], axis=1)
    r, piv = rref(aug, pivot_cols=range(n))
    rk = len(piv)
    if np.any(r[rk:, n:]):
        return None
    x = np.zeros((n, b.shape[1]), dtype=np.uint8)
    for i, c in enumerate(piv):
        x[c] = r[i, n:]
    return x[:, 0] if vec else x


def nullspace(a) -> np.ndarray:
    """Basis of {x : a @ x = 0} as rows."""
    a = as_bits(a)
    n = a.shape[1]
    r, piv = rref(a)
    free = [c for c in range(n) if c not in piv]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for k, f in enumerate(free):
        basis[k, f] = 1
        for i, c in enumerate(piv):
            basis[k, c] = r[i, f]
    return basis


def bits_to_int(bits) -> int:
    """Big-endian: bits[0] is the most significant."""
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def int_to_bits(v: int, n: int) -> np.ndarray:
    return np.array([(v >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.uint8)
