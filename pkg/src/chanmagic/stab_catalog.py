"""Exhaustive catalogues of pure stabiliser states and affine subspaces of F_2^n.

Every n-qubit stabiliser state is written uniquely as

    |K, q, d>  ~  sum_{x in K} i^(d.x) (-1)^(x^T Q x + lam.x) |x>

where K = h + span(G) is an affine space with G in reduced column echelon
form (pivot = topmost one of each column, pivots increasing) and h the
lexicographically smallest coset element, which has zeros on the pivot rows.
The phase data (d, lam, Q) is supported on the pivot rows only, which makes
the parametrisation a bijection. Enumerating (K, d, lam, Q) therefore lists
each state once, with no deduplication.

Columns of the LP matrix are stored sparsely: each state has exactly 2^n
non-zero Pauli expectations, kept as (index, sign) pairs.
"""
from __future__ import annotations

import hashlib
import itertools
import os
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import gf2
from .pauli_basis import xz_index_tables
from .pauli_tableau import PauliString, StabilizerTableau

_POPCOUNT = np.array([bin(i).count("1") for i in range(1 << 10)], dtype=np.int64)


def stabilizer_state_count(n: int) -> int:
    out = 2 ** n
    for j in range(1, n + 1):
        out *= 2 ** j + 1
    return out


@dataclass(frozen=True)
class AffineSpace:
    n: int
    G: np.ndarray  # n x k, reduced column echelon form
    h: np.ndarray  # canonical shift
    pivots: tuple

    @property
    def k(self) -> int:
        return self.G.shape[1]

    @property
    def nontrivial(self) -> bool:
        return self.k >= 1

    def elements(self) -> np.ndarray:
        """All points as an (2^k, n) bit array in y-lexicographic order."""
        if self.k == 0:
            return self.h[None, :].copy()
        ys = np.array(list(itertools.product([0, 1], repeat=self.k)), dtype=np.uint8)
        return ((ys.astype(np.int64) @ self.G.T.astype(np.int64)) % 2 ^ self.h).astype(np.uint8)

    def contains(self, x) -> bool:
        v = np.asarray(x, dtype=np.uint8) ^ self.h
        return gf2.solve(self.G, v) is not None if self.k else not np.any(v)


def _linear_subspaces(n: int, k: int):
    for piv in itertools.combinations(range(n), k):
        free_slots = [(r, i) for i, p in enumerate(piv) for r in range(p + 1, n) if r not in piv]
        for bits in itertools.product([0, 1], repeat=len(free_slots)):
            g = np.zeros((n, k), dtype=np.uint8)
            for i, p in enumerate(piv):
                g[p, i] = 1
            for (r, i), b in zip(free_slots, bits):
                g[r, i] = b
            yield g, piv


@lru_cache(maxsize=None)
def enumerate_affine(n: int) -> tuple:
    """All affine subspaces of F_2^n, ordered by dimension then pivots."""
    if not 1 <= n <= 8:
        raise ValueError("n out of range")
    out = []
    for k in range(n + 1):
        for g, piv in _linear_subspaces(n, k):
            nonpiv = [r for r in range(n) if r not in piv]
            for bits in itertools.product([0, 1], repeat=len(nonpiv)):
                h = np.zeros(n, dtype=np.uint8)
                h[nonpiv] = bits
                g.setflags(write=False)
                h.setflags(write=False)
                out.append(AffineSpace(n, g, h, piv))
    return tuple(out)


def affine_counts(n: int):
    spaces = enumerate_affine(n)
    return len(spaces), sum(1 for s in spaces if s.nontrivial)


def _bit(n, q):
    return 1 << (n - 1 - q)


def _space_gens(space: AffineSpace):
    """Integer-encoded generator data shared by all phase choices on a space."""
    n, k = space.n, space.k
    piv = space.pivots
    gx = np.array([gf2.bits_to_int(space.G[:, i]) for i in range(k)], dtype=np.int64)
    zgens = []
    for r in range(n):
        if r in piv:
            continue
        z = _bit(n, r)
        for i, p in enumerate(piv):
            if space.G[r, i]:
                z |= _bit(n, p)
        par = int(_POPCOUNT[z & gf2.bits_to_int(space.h)]) & 1
        zgens.append((z, 2 * par))
    return gx, zgens


def phase_choices(k: int) -> int:
    return 4 ** k * 2 ** (k * (k - 1) // 2)


def _decode_phases(k: int, combos: np.ndarray):
    """combo -> (d bits (C,k), lam bits (C,k), Q bits (C, k, k) symmetric)."""
    lam = (combos[:, None] >> np.arange(k)) & 1
    d = (combos[:, None] >> (k + np.arange(k))) & 1
    qsym = np.zeros((combos.size, k, k), dtype=np.int64)
    qcode = combos >> (2 * k)
    for t, (i, j) in enumerate(itertools.combinations(range(k), 2)):
        b = (qcode >> t) & 1
        qsym[:, i, j] = b
        qsym[:, j, i] = b
    return d, lam, qsym


def _generators(space: AffineSpace, combos: np.ndarray):
    """Generators (x_int, z_int, r) arrays of shape (C, n) in XZ form."""
    n, k = space.n, space.k
    gx, zgens = _space_gens(space)
    c = combos.size
    d, lam, qsym = _decode_phases(k, combos)
    pbits = np.array([_bit(n, p) for p in space.pivots], dtype=np.int64)
    gen_x = np.zeros((c, n), dtype=np.int64)
    gen_z = np.zeros((c, n), dtype=np.int64)
    gen_r = np.zeros((c, n), dtype=np.int64)
    for i in range(k):
        gen_x[:, i] = gx[i]
        z = d[:, i] * pbits[i]
        if k > 1:
            z = z + qsym[:, i, :] @ pbits
        gen_z[:, i] = z
        gen_r[:, i] = (d[:, i] + 2 * lam[:, i]) % 4
    for j, (z, r) in enumerate(zgens):
        gen_z[:, k + j] = z
        gen_r[:, k + j] = r
    return gen_x, gen_z, gen_r


def _group_columns(n, gen_x, gen_z, gen_r):
    """Pauli-vector columns as (index, sign) arrays of shape (C, 2^n)."""
    c = gen_x.shape[0]
    ex = np.zeros((c, 1), dtype=np.int64)
    ez = np.zeros((c, 1), dtype=np.int64)
    er = np.zeros((c, 1), dtype=np.int64)
    for i in range(n):
        gx = gen_x[:, i:i + 1]
        gz = gen_z[:, i:i + 1]
        gr = gen_r[:, i:i + 1]
        nr = (er + gr + 2 * _POPCOUNT[ez & gx]) % 4
        ex = np.concatenate([ex, ex ^ gx], axis=1)
        ez = np.concatenate([ez, ez ^ gz], axis=1)
        er = np.concatenate([er, nr], axis=1)
    idx_t, ypow_t = xz_index_tables(n)
    idx = idx_t[ex, ez]
    herm = (er - ypow_t[ex, ez]) % 4
    assert not np.any(herm % 2)
    sign = (1 - herm).astype(np.int8)
    order = np.argsort(idx, axis=1, kind="stable")
    idx = np.take_along_axis(idx, order, axis=1)
    sign = np.take_along_axis(sign, order, axis=1)
    return idx.astype(np.int16 if n <= 7 else np.int32), sign


@dataclass
class AffineStabForm:
    space: AffineSpace
    Q: np.ndarray
    lam: np.ndarray
    d: np.ndarray

    @classmethod
    def from_combo(cls, space: AffineSpace, combo: int) -> "AffineStabForm":
        n, k = space.n, space.k
        d, lam, qsym = _decode_phases(k, np.array([combo], dtype=np.int64))
        Q = np.zeros((n, n), dtype=np.uint8)
        dv = np.zeros(n, dtype=np.uint8)
        lv = np.zeros(n, dtype=np.uint8)
        for i, p in enumerate(space.pivots):
            dv[p] = d[0, i]
            lv[p] = lam[0, i]
            for j, p2 in enumerate(space.pivots):
                if j > i:
                    Q[p, p2] = qsym[0, i, j]
        return cls(space, Q, lv, dv)

    def amplitudes(self) -> np.ndarray:
        n = self.space.n
        pts = self.space.elements().astype(np.int64)
        v = np.zeros(2 ** n, dtype=complex)
        for x in pts:
            q = int(x @ self.Q.astype(np.int64) @ x + self.lam @ x) % 2
            val = (1j ** int(self.d.astype(np.int64) @ x)) * (-1) ** q
            v[gf2.bits_to_int(x)] = val
        return v / np.sqrt(len(pts))

    def tableau(self) -> StabilizerTableau:
        return affine_form_tableau(self.space, self._combo())

    def _combo(self) -> int:
        k = self.space.k
        piv = self.space.pivots
        code = 0
        for t, (i, j) in enumerate(itertools.combinations(range(k), 2)):
            code |= int(self.Q[piv[i], piv[j]]) << t
        combo = code << (2 * k)
        for i, p in enumerate(piv):
            combo |= int(self.lam[p]) << i
            combo |= int(self.d[p]) << (k + i)
        return combo


def _int_rows_to_tableau(n, gx, gz, gr) -> StabilizerTableau:
    gens = [(gf2.int_to_bits(int(a), n), gf2.int_to_bits(int(b), n), int(r)) for a, b, r in zip(gx, gz, gr)]
    return StabilizerTableau.from_stabilizers(gens)


def affine_form_tableau(space: AffineSpace, combo: int = 0) -> StabilizerTableau:
    gx, gz, gr = _generators(space, np.array([combo], dtype=np.int64))
    return _int_rows_to_tableau(space.n, gx[0], gz[0], gr[0])


def affine_state(space: AffineSpace):
    """(tableau, dense vector) of the uniform superposition over the space."""
    form = AffineStabForm.from_combo(space, 0)
    return affine_form_tableau(space, 0), form.amplitudes()


def column_to_tableau(n: int, idx, sign) -> StabilizerTableau:
    """Tableau of the stabiliser state with the given non-zero Pauli expectations."""
    gens = []
    mat = []
    for i, s in zip(np.asarray(idx), np.asarray(sign)):
        i = int(i)
        if i == 0:
            continue
        x = [0] * n
        z = [0] * n
        for q in range(n):
            dgt = (i >> (2 * (n - 1 - q))) & 3
            x[q] = 1 if dgt in (1, 2) else 0
            z[q] = 1 if dgt in (2, 3) else 0
        row = np.array(x + z, dtype=np.uint8)
        if gf2.rank(np.array(mat + [row])) > len(mat):
            mat.append(row)
            gens.append(PauliString(tuple(x), tuple(z), 0 if s > 0 else 2))
            if len(gens) == n:
                break
    return StabilizerTableau.from_stabilizers(gens)


def tableau_column(t: StabilizerTableau):
    """Sparse Pauli vector (index, sign) of a tableau state."""
    n = t.n
    gx = np.array([[gf2.bits_to_int(t.x[n + i]) for i in range(n)]], dtype=np.int64)
    gz = np.array([[gf2.bits_to_int(t.z[n + i]) for i in range(n)]], dtype=np.int64)
    gr = t.r[n:][None, :].astype(np.int64)
    idx, sign = _group_columns(n, gx, gz, gr)
    return idx[0], sign[0]


def tableau_pauli_vector(t: StabilizerTableau) -> np.ndarray:
    idx, sign = tableau_column(t)
    v = np.zeros(4 ** t.n)
    v[idx.astype(np.int64)] = sign
    return v


class StabilizerCatalog:
    """All n-qubit pure stabiliser states as sparse Pauli-vector columns."""

    def __init__(self, n: int, idx: np.ndarray, sign: np.ndarray):
        self.n = n
        self.idx = idx
        self.sign = sign
        self._key_index = None

    def __len__(self):
        return self.idx.shape[0]

    @property
    def count(self):
        return len(self)

    def tableau(self, i: int) -> StabilizerTableau:
        return column_to_tableau(self.n, self.idx[i], self.sign[i])

    @property
    def states(self):
        return _LazyStates(self)

    def column(self, i: int) -> np.ndarray:
        v = np.zeros(4 ** self.n)
        v[self.idx[i].astype(np.int64)] = self.sign[i]
        return v

    def dense_A(self, cols=None) -> np.ndarray:
        """Dense 4^n x N float matrix (only sensible for n <= 4)."""
        sel = np.arange(len(self)) if cols is None else np.asarray(cols)
        a = np.zeros((4 ** self.n, sel.size))
        rows = self.idx[sel].astype(np.int64)
        a[rows, np.arange(sel.size)[:, None]] = self.sign[sel]
        return a

    @property
    def A_matrix(self):
        return self.dense_A()

    def rmatvec(self, y, rows=None) -> np.ndarray:
        """A^T y, computed in chunks."""
        y = np.asarray(y, dtype=float)
        out = np.empty(len(self))
        step = 1 << 18
        for s in range(0, len(self), step):
            e = min(len(self), s + step)
            out[s:e] = np.sum(y[self.idx[s:e].astype(np.int64)] * self.sign[s:e], axis=1)
        return out

    def index_of(self, t: StabilizerTableau) -> int:
        if self._key_index is None:
            keys = np.ascontiguousarray(self.idx.astype(np.int32) * 2 + (self.sign < 0))
            self._key_index = {row.tobytes(): i for i, row in enumerate(keys)}
        idx, sign = tableau_column(t)
        key = np.ascontiguousarray(idx.astype(np.int32) * 2 + (sign < 0)).tobytes()
        return self._key_index[key]


class _LazyStates:
    def __init__(self, cat):
        self.cat = cat

    def __len__(self):
        return len(self.cat)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self.cat.tableau(j) for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return self.cat.tableau(i)

    def __iter__(self):
        for i in range(len(self)):
            yield self.cat.tableau(i)


def iter_state_blocks(n: int, block: int = 1 << 16):
    """Yield (idx, sign) column blocks in catalogue order."""
    for space in enumerate_affine(n):
        total = phase_choices(space.k)
        for s in range(0, total, block):
            combos = np.arange(s, min(total, s + block), dtype=np.int64)
            gx, gz, gr = _generators(space, combos)
            yield _group_columns(n, gx, gz, gr)


def _build(n: int) -> StabilizerCatalog:
    idx_parts, sign_parts = [], []
    for idx, sign in iter_state_blocks(n):
        idx_parts.append(idx)
        sign_parts.append(sign)
    return StabilizerCatalog(n, np.concatenate(idx_parts), np.concatenate(sign_parts))


_MEMO: dict = {}


def enumerate_states(n: int, cache_dir=None) -> StabilizerCatalog:
    """Catalogue of all n-qubit stabiliser states (memoised; optionally disk cached)."""
    if not 1 <= n <= 5:
        raise ValueError("n must be in 1..5")
    if n in _MEMO:
        return _MEMO[n]
    cache_dir = cache_dir or os.environ.get("MAGIC_CACHE_DIR")
    cat = None
    if cache_dir:
        path = cache_path(cache_dir, n)
        if path.exists():
            try:
                cat = cache_read(path)
            except CacheError:
                cat = None
    if cat is None:
        cat = _build(n)
        if cache_dir:
            Path(cache_dir).mkdir(parents=True, exist_ok=True)
            cache_write(cat, cache_path(cache_dir, n))
    _MEMO[n] = cat
    return cat


# ---------------------------------------------------------------------------
# capacity input sets


def multicontrol_parameters(ch):
    """(t, n) if ch is diag(e^(i phi), 1, ..., 1), else None."""
    if len(ch.kraus_ops) != 1 or not ch.is_diagonal:
        return None
    d = np.diag(ch.kraus_ops[0])
    if not np.allclose(d[1:], 1, atol=1e-12) or np.isclose(d[0], 1, atol=1e-12):
        return None
    return float(np.angle(d[0])), ch.n


def subspace_representative(n: int, k: int) -> AffineSpace:
    """span{e_1, ..., e_k}: the first k qubits free, the rest fixed to 0."""
    g = np.zeros((n, k), dtype=np.uint8)
    for i in range(k):
        g[i, i] = 1
    return AffineSpace(n, g, np.zeros(n, dtype=np.uint8), tuple(range(k)))


def capacity_input_set(ch):
    """Candidate maximisers of the output robustness.

    diagonal multicontrol phase: one linear subspace per dimension k = 1..n;
    other diagonal channels: one |K> per non-trivial affine space (n qubits);
    general channels: every 2n-qubit stabiliser state.
    """
    n = ch.n
    if ch.is_diagonal:
        if multicontrol_parameters(ch) is not None:
            return [affine_state(subspace_representative(n, k))[0] for k in range(1, n + 1)]
        return [affine_state(s)[0] for s in enumerate_affine(n) if s.nontrivial]
    cat = enumerate_states(2 * n)
    return list(cat.states)


def reduced_state_classes(n: int):
    """Group 2n-qubit catalogue states by their reduced state on the first n qubits.

    Returns a list of (representative index, member indices).
    """
    cat = enumerate_states(2 * n)
    block = 4 ** n
    classes: dict = {}
    for i in range(len(cat)):
        idx = cat.idx[i].astype(np.int64)
        sel = idx % block == 0
        key = (idx[sel] // block).astype(np.int32).tobytes() + cat.sign[i][sel].tobytes()
        classes.setdefault(key, []).append(i)
    return [(members[0], members) for members in classes.values()]


# ---------------------------------------------------------------------------
# on-disk cache

CACHE_MAGIC = b"STBC"
CACHE_VERSION = 1
_HEADER = struct.Struct("<4sIIQQ")


class CacheError(Exception):
    pass


def cache_path(cache_dir, n: int) -> Path:
    return Path(cache_dir) / f"stab_n{n}.stbc"


def _pack_columns(cat: StabilizerCatalog) -> bytes:
    """Column-major 2-bit codes: 0 -> 0, 1 -> +1, 3 -> -1; four entries per byte."""
    n = cat.n
    rows = 4 ** n
    out = bytearray()
    step = max(1, (1 << 22) // rows)
    for s in range(0, len(cat), step):
        e = min(len(cat), s + step)
        codes = np.zeros((e - s, rows), dtype=np.uint8)
        ii = cat.idx[s:e].astype(np.int64)
        codes[np.arange(e - s)[:, None], ii] = np.where(cat.sign[s:e] > 0, 1, 3)
        c = codes.reshape(-1, 4)
        out += (c[:, 0] | (c[:, 1] << 2) | (c[:, 2] << 4) | (c[:, 3] << 6)).astype(np.uint8).tobytes()
    return bytes(out)


def _unpack_columns(n: int, count: int, payload: bytes):
    rows = 4 ** n
    b = np.frombuffer(payload, dtype=np.uint8)
    if b.size * 4 != rows * count:
        raise CacheError("payload size mismatch")
    nnz = 2 ** n
    idx = np.empty((count, nnz), dtype=np.int16)
    sign = np.empty((count, nnz), dtype=np.int8)
    per = rows // 4
    step = max(1, (1 << 22) // rows)
    for s in range(0, count, step):
        e = min(count, s + step)
        chunk = b[s * per:e * per]
        codes = np.stack([(chunk >> sh) & 3 for sh in (0, 2, 4, 6)], axis=1).reshape(e - s, rows)
        r, c = np.nonzero(codes)
        if r.size != (e - s) * nnz:
            raise CacheError("corrupt column data")
        idx[s:e] = c.reshape(e - s, nnz)
        sign[s:e] = np.where(codes[r, c] == 1, 1, -1).reshape(e - s, nnz)
    return idx, sign


def cache_write(cat: StabilizerCatalog, path) -> Path:
    payload = _pack_columns(cat)
    chk = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
    path = Path(path)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as f:
        f.write(_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, cat.n, len(cat), chk))
        f.write(payload)
    tmp.replace(path)
    return path


def cache_header(path):
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
    if len(head) != _HEADER.size:
        raise CacheError("truncated header")
    magic, version, n, count, chk = _HEADER.unpack(head)
    if magic != CACHE_MAGIC:
        raise CacheError("bad magic")
    if version != CACHE_VERSION:
        raise CacheError(f"version mismatch: file has {version}, expected {CACHE_VERSION}")
    return {"n": n, "count": count, "checksum": chk, "version": version}


def cache_read(path) -> StabilizerCatalog:
    hdr = cache_header(path)
    with open(path, "rb") as f:
        f.seek(_HEADER.size)
        payload = f.read()
    chk = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
    if chk != hdr["checksum"]:
        raise CacheError("checksum mismatch")
    idx, sign = _unpack_columns(hdr["n"], hdr["count"], payload)
    return StabilizerCatalog(hdr["n"], idx, sign)


def cache_verify(path) -> dict:
    cat = cache_read(path)
    hdr = cache_header(path)
    expected = stabilizer_state_count(hdr["n"])
    if len(cat) != expected:
        raise CacheError(f"count {len(cat)} != expected {expected}")
    if np.any(cat.idx[:, 0] != 0) or np.any(cat.sign[:, 0] != 1):
        raise CacheError("identity entry must be +1")
    return hdr
