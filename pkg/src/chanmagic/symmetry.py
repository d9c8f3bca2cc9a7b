"""Qubit-permutation symmetry reduction for catalogue LPs.

If the target Pauli vector b (and every constraint row set) is invariant
under a group G of qubit permutations, averaging any feasible decomposition
over G keeps it feasible without increasing its l1 norm. So the LP can be
solved over G-invariant solutions: rows collapse to sums over Pauli orbits
and stabiliser states with equal orbit-sum profiles collapse to one column.
The optimum is unchanged. A reduced solution is expanded back by spreading
each column's weight uniformly over the states sharing its profile.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


def permute_pauli_indices(n: int, perm) -> np.ndarray:
    """Index map: Pauli index of P  ->  index of P with qubit q moved to perm[q]."""
    d = np.arange(4 ** n)
    digits = [(d >> (2 * (n - 1 - q))) & 3 for q in range(n)]
    out = np.zeros_like(d)
    for q in range(n):
        out |= digits[q] << (2 * (n - 1 - perm[q]))
    return out


def invariant_permutations(b: np.ndarray, n: int, tol: float = 1e-10, fixed_sets=()) -> list:
    """All qubit permutations leaving b invariant (and mapping each index set in fixed_sets to itself)."""
    out = []
    sets = [np.zeros(4 ** n, dtype=bool) for _ in fixed_sets]
    for s, rows in zip(sets, fixed_sets):
        s[np.asarray(rows, dtype=np.int64)] = True
    for perm in itertools.permutations(range(n)):
        m = permute_pauli_indices(n, perm)
        if np.max(np.abs(b[m] - b), initial=0.0) > tol:
            continue
        if any(np.any(s[m] != s) for s in sets):
            continue
        out.append(perm)
    return out


def pauli_orbits(n: int, perms) -> tuple:
    """(class id per Pauli index, number of classes); ids follow first appearance."""
    maps = [permute_pauli_indices(n, p) for p in perms]
    rep = np.min(np.stack(maps), axis=0) if maps else np.arange(4 ** n)
    # the group is closed, so min over the orbit is a canonical representative
    _, cls = np.unique(rep, return_inverse=True)
    return cls.astype(np.int64), int(cls.max()) + 1


@dataclass
class ReducedCatalog:
    features: np.ndarray  # U x R orbit-sum profiles (float)
    members: list  # per profile, the catalogue indices sharing it
    cls: np.ndarray
    n_classes: int

    @property
    def size(self) -> int:
        return self.features.shape[0]


def reduce_catalog(cat, cls: np.ndarray, n_classes: int, block: int = 1 << 16) -> ReducedCatalog:
    nc = len(cat)
    feats = np.empty((nc, n_classes), dtype=np.int8)
    for s in range(0, nc, block):
        e = min(nc, s + block)
        c = cls[cat.idx[s:e].astype(np.int64)]
        lin = (np.arange(e - s)[:, None] * n_classes + c).ravel()
        f = np.bincount(lin, weights=cat.sign[s:e].ravel().astype(float), minlength=(e - s) * n_classes)
        feats[s:e] = np.rint(f).astype(np.int8).reshape(e - s, n_classes)
    view = np.ascontiguousarray(feats).view(np.dtype((np.void, n_classes)))[:, 0]
    _, first, inv = np.unique(view, return_index=True, return_inverse=True)
    order = np.argsort(inv, kind="stable")
    bounds = np.searchsorted(inv[order], np.arange(first.size + 1))
    members = [order[bounds[i]:bounds[i + 1]] for i in range(first.size)]
    return ReducedCatalog(feats[first].astype(float), members, cls, n_classes)


def class_sums(v: np.ndarray, cls: np.ndarray, n_classes: int) -> np.ndarray:
    return np.bincount(cls, weights=v, minlength=n_classes)


def expand(red: ReducedCatalog, x: np.ndarray, tol: float = 1e-13):
    """Spread reduced weights over catalogue states: (indices, weights)."""
    refs, ws = [], []
    for u in np.flatnonzero(np.abs(x) > tol):
        mem = red.members[u]
        refs.append(mem)
        ws.append(np.full(mem.size, x[u] / mem.size))
    if not refs:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    refs, ws = np.concatenate(refs), np.concatenate(ws)
    order = np.argsort(refs)
    return refs[order], ws[order]
