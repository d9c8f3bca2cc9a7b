"""Pauli strings and CHP-style stabiliser tableaux.

Internally every Pauli row is stored as i^r X^x Z^z (the "XZ form"), which
makes products trivial: (i^r X^a Z^b)(i^s X^c Z^d) = i^(r+s+2 b.c) X^(a+c) Z^(b+d).
The public PauliString uses the Hermitian convention where the single-qubit
letter for x=z=1 is Y = iXZ.

Global phases of states are not tracked. Probabilities are exact dyadic
rationals returned as ``fractions.Fraction``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import gf2

_LETTERS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_PHASE_STR = {0: "+", 1: "+i", 2: "-", 3: "-i"}


@dataclass(frozen=True)
class PauliString:
    """i^phase * P_0 (x) P_1 (x) ... with P_q in {I, X, Y, Z}."""

    x: tuple
    z: tuple
    phase: int = 0

    def __post_init__(self):
        if len(self.x) != len(self.z):
            raise ValueError("x and z must have the same length")
        object.__setattr__(self, "x", tuple(int(b) & 1 for b in self.x))
        object.__setattr__(self, "z", tuple(int(b) & 1 for b in self.z))
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def from_str(cls, s: str) -> "PauliString":
        s = s.strip().replace("−", "-")
        phase = 0
        if s.startswith("+"):
            s = s[1:]
        elif s.startswith("-"):
            phase = 2
            s = s[1:]
        if s.startswith("i"):
            phase += 1
            s = s[1:]
        if not s or any(c not in _LETTERS for c in s):
            raise ValueError(f"bad Pauli string {s!r}")
        x = [_LETTERS[c][0] for c in s]
        z = [_LETTERS[c][1] for c in s]
        return cls(tuple(x), tuple(z), phase)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls((0,) * n, (0,) * n, 0)

    @classmethod
    def single(cls, n: int, q: int, letter: str) -> "PauliString":
        x = [0] * n
        z = [0] * n
        x[q], z[q] = _LETTERS[letter]
        return cls(tuple(x), tuple(z))

    def letters(self) -> str:
        inv = {v: k for k, v in _LETTERS.items()}
        return "".join(inv[(a, b)] for a, b in zip(self.x, self.z))

    def __str__(self):
        return _PHASE_STR[self.phase] + self.letters()

    def xz_phase(self) -> int:
        """Phase r such that this operator equals i^r X^x Z^z."""
        return (self.phase + sum(a & b for a, b in zip(self.x, self.z))) % 4

    @classmethod
    def from_xz(cls, x, z, r) -> "PauliString":
        x = tuple(int(b) for b in x)
        z = tuple(int(b) for b in z)
        return cls(x, z, (int(r) - sum(a & b for a, b in zip(x, z))) % 4)

    def __mul__(self, other: "PauliString") -> "PauliString":
        return pauli_mul(self, other)

    def commutes(self, other: "PauliString") -> bool:
        s = sum(a * d + b * c for a, b, c, d in zip(self.x, self.z, other.x, other.z))
        return s % 2 == 0

    def weight(self) -> int:
        return sum(1 for a, b in zip(self.x, self.z) if a or b)

    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    def to_matrix(self) -> np.ndarray:
        mats = {
            (0, 0): np.eye(2),
            (1, 0): np.array([[0, 1], [1, 0]]),
            (1, 1): np.array([[0, -1j], [1j, 0]]),
            (0, 1): np.diag([1, -1]),
        }
        out = np.array([[1.0 + 0j]])
        for a, b in zip(self.x, self.z):
            out = np.kron(out, mats[(a, b)])
        return (1j ** self.phase) * out


def pauli_mul(a: PauliString, b: PauliString) -> PauliString:
    if a.n != b.n:
        raise ValueError("qubit count mismatch")
    ax, az, bx, bz = (np.array(v, dtype=np.int64) for v in (a.x, a.z, b.x, b.z))
    r = a.xz_phase() + b.xz_phase() + 2 * int(az @ bx)
    return PauliString.from_xz(ax ^ bx, az ^ bz, r)


# ---------------------------------------------------------------------------
# vectorised gate action on arrays of Pauli rows in XZ form


def _rows_gate(x, z, r, gate: str, qs: Sequence[int]):
    g = gate.upper()
    if g == "H":
        (q,) = qs
        r += 2 * (x[:, q] & z[:, q])
        x[:, q], z[:, q] = z[:, q].copy(), x[:, q].copy()
    elif g == "S":
        (q,) = qs
        r += x[:, q]
        z[:, q] ^= x[:, q]
    elif g == "SDG":
        (q,) = qs
        # S^3
        for _ in range(3):
            r += x[:, q]
            z[:, q] ^= x[:, q]
    elif g == "X":
        (q,) = qs
        r += 2 * z[:, q]
    elif g == "Z":
        (q,) = qs
        r += 2 * x[:, q]
    elif g == "Y":
        (q,) = qs
        r += 2 * (x[:, q] ^ z[:, q])
    elif g in ("CNOT", "CX"):
        c, t = qs
        x[:, t] ^= x[:, c]
        z[:, c] ^= z[:, t]
    elif g == "CZ":
        a, b = qs
        r += 2 * (x[:, a] & x[:, b])
        z[:, a] ^= x[:, b]
        z[:, b] ^= x[:, a]
    elif g == "SWAP":
        a, b = qs
        x[:, [a, b]] = x[:, [b, a]]
        z[:, [a, b]] = z[:, [b, a]]
    else:
        raise ValueError(f"unknown gate {gate!r}")
    r %= 4


GATE_INVERSE = {"H": "H", "S": "SDG", "SDG": "S", "X": "X", "Y": "Y", "Z": "Z",
                "CNOT": "CNOT", "CX": "CX", "CZ": "CZ", "SWAP": "SWAP"}


def invert_circuit(gates):
    return [(GATE_INVERSE[g.upper()], tuple(q)) for g, q in reversed(list(gates))]


def _row_product(x1, z1, r1, x2, z2, r2):
    return x1 ^ x2, z1 ^ z2, (r1 + r2 + 2 * int(z1.astype(np.int64) @ x2)) % 4


class StabilizerTableau:
    """Stabiliser state on n qubits with destabilisers.

    Rows 0..n-1 are destabilisers, rows n..2n-1 stabilisers. Arrays are
    uint8 bits (x, z) and int64 phases r with row = i^r X^x Z^z.
    Methods ending in an underscore mutate in place and return self; the
    module-level functions are pure.
    """

    def __init__(self, x, z, r):
        self.x = np.asarray(x, dtype=np.uint8)
        self.z = np.asarray(z, dtype=np.uint8)
        self.r = np.asarray(r, dtype=np.int64) % 4
        self.n = self.x.shape[1]
        assert self.x.shape == (2 * self.n, self.n)

    # -- construction -------------------------------------------------------
    @classmethod
    def zero_state(cls, n: int) -> "StabilizerTableau":
        eye = np.eye(n, dtype=np.uint8)
        zero = np.zeros((n, n), dtype=np.uint8)
        x = np.concatenate([eye, zero])
        z = np.concatenate([zero, eye])
        return cls(x, z, np.zeros(2 * n, dtype=np.int64))

    @classmethod
    def from_stabilizers(cls, gens: Iterable) -> "StabilizerTableau":
        """Build a tableau from n independent commuting Hermitian generators.

        gens: PauliStrings, or (x, z, r) triples in XZ form.
        """
        rows = []
        for g in gens:
            if isinstance(g, PauliString):
                if not g.is_hermitian():
                    raise ValueError(f"generator {g} is not Hermitian")
                rows.append((np.array(g.x), np.array(g.z), g.xz_phase()))
            else:
                rows.append((np.asarray(g[0]), np.asarray(g[1]), int(g[2])))
        n = len(rows)
        if n == 0:
            return cls(np.zeros((0, 0)), np.zeros((0, 0)), np.zeros(0))
        sx = np.array([r[0] for r in rows], dtype=np.uint8)
        sz = np.array([r[1] for r in rows], dtype=np.uint8)
        sr = np.array([r[2] for r in rows], dtype=np.int64)
        if sx.shape != (n, n):
            raise ValueError("need exactly n generators on n qubits")
        sym = (sx.astype(np.int64) @ sz.T + sz.astype(np.int64) @ sx.T) % 2
        if np.any(sym):
            raise ValueError("generators do not commute")
        if gf2.rank(np.concatenate([sx, sz], axis=1)) != n:
            raise ValueError("generators are not independent")
        if np.any((sr - np.sum(sx & sz, axis=1)) % 2):
            raise ValueError("generators must be Hermitian")
        dx, dz = _destabilizers(sx, sz)
        x = np.concatenate([dx, sx])
        z = np.concatenate([dz, sz])
        # Hermitian destabilisers (sign irrelevant)
        dr = np.sum(dx & dz, axis=1) % 4
        return cls(x, z, np.concatenate([dr, sr]))

    @classmethod
    def from_text(cls, text: str) -> "StabilizerTableau":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        return cls.from_stabilizers([PauliString.from_str(ln) for ln in lines])

    def to_text(self) -> str:
        return "\n".join(str(p) for p in self.stab_rows)

    def copy(self) -> "StabilizerTableau":
        return StabilizerTableau(self.x.copy(), self.z.copy(), self.r.copy())

    # -- views ----------------------------------------------------------------
    def _row(self, i) -> PauliString:
        return PauliString.from_xz(self.x[i], self.z[i], self.r[i])

    @property
    def stab_rows(self) -> list:
        return [self._row(self.n + i) for i in range(self.n)]

    @property
    def destab_rows(self) -> list:
        return [self._row(i) for i in range(self.n)]

    @property
    def sign_bits(self) -> np.ndarray:
        return (((self.r - np.sum(self.x & self.z, axis=1)) % 4) // 2).astype(np.uint8)

    def check(self):
        n = self.n
        xs = self.x.astype(np.int64)
        zs = self.z.astype(np.int64)
        sym = (xs @ zs.T + zs @ xs.T) % 2
        want = np.zeros((2 * n, 2 * n), dtype=np.int64)
        want[:n, n:] = np.eye(n, dtype=np.int64)
        want[n:, :n] = np.eye(n, dtype=np.int64)
        np.testing.assert_array_equal(sym[n:, n:], 0)
        np.testing.assert_array_equal(sym[:n, n:], want[:n, n:])
        hermitian = (self.r[n:] - np.sum(self.x[n:] & self.z[n:], axis=1)) % 2
        assert not np.any(hermitian)
        return True

    # -- gates ---------------------------------------------------------------
    def apply_(self, gate: str, *qs) -> "StabilizerTableau":
        for q in qs:
            if not 0 <= q < self.n:
                raise IndexError(f"qubit {q} out of range")
        if len(set(qs)) != len(qs):
            raise ValueError("repeated qubit")
        _rows_gate(self.x, self.z, self.r, gate, qs)
        return self

    def apply_circuit_(self, gates) -> "StabilizerTableau":
        for g, qs in gates:
            self.apply_(g, *qs)
        return self

    # -- measurement -----------------------------------------------------------
    def _anticommuting(self, px, pz):
        return ((self.x.astype(np.int64) @ pz + self.z.astype(np.int64) @ px) % 2).astype(bool)

    def measure_(self, p: PauliString, forced=None, rng=None):
        """Measure Hermitian Pauli p. Returns (outcome, probability).

        With ``forced`` set, the state is projected onto that outcome; a
        zero-probability outcome returns (forced, 0) and leaves self unchanged.
        """
        if p.n != self.n:
            raise ValueError("qubit count mismatch")
        if not p.is_hermitian():
            raise ValueError("can only measure Hermitian Paulis")
        n = self.n
        px = np.array(p.x, dtype=np.uint8)
        pz = np.array(p.z, dtype=np.uint8)
        pr = p.xz_phase()
        anti = self._anticommuting(px.astype(np.int64), pz.astype(np.int64))
        stab_anti = np.nonzero(anti[n:])[0]
        if stab_anti.size:
            k = n + stab_anti[0]
            if forced is None:
                outcome = 1 if rng is None or rng.random() < 0.5 else -1
            else:
                outcome = int(forced)
            rows = np.nonzero(anti)[0]
            rows = rows[(rows != k) & (rows != k - n)]
            if rows.size:
                zk = self.z[k].astype(np.int64)
                # row_i <- row_i * row_k
                ph = 2 * (self.z[rows].astype(np.int64) @ self.x[k].astype(np.int64))
                self.r[rows] = (self.r[rows] + self.r[k] + ph) % 4
                self.x[rows] ^= self.x[k]
                self.z[rows] ^= self.z[k]
                del zk
            self.x[k - n] = self.x[k]
            self.z[k - n] = self.z[k]
            self.r[k - n] = self.r[k]
            self.x[k] = px
            self.z[k] = pz
            self.r[k] = (pr + (0 if outcome == 1 else 2)) % 4
            return outcome, Fraction(1, 2)
        outcome = self.expectation_sign(p, _anti=anti)
        if forced is not None and int(forced) != outcome:
            return int(forced), Fraction(0)
        return outcome, Fraction(1)

    def expectation_sign(self, p: PauliString, _anti=None) -> int:
        """<p> for a Pauli in the stabiliser group up to sign (+1/-1), else 0."""
        n = self.n
        px = np.array(p.x, dtype=np.int64)
        pz = np.array(p.z, dtype=np.int64)
        anti = self._anticommuting(px, pz) if _anti is None else _anti
        if np.any(anti[n:]):
            return 0
        sel = n + np.nonzero(anti[:n])[0]
        ax = np.zeros(n, dtype=np.uint8)
        az = np.zeros(n, dtype=np.uint8)
        ar = 0
        for i in sel:
            ax, az, ar = _row_product(ax, az, ar, self.x[i], self.z[i], self.r[i])
        assert np.array_equal(ax, px) and np.array_equal(az, pz)
        d = (ar - p.xz_phase()) % 4
        assert d in (0, 2)
        return 1 if d == 0 else -1

    def expectation(self, p: PauliString) -> int:
        """<psi|p|psi> for Hermitian p; always in {-1, 0, 1}."""
        return self.expectation_sign(p)

    # -- structure -----------------------------------------------------------
    def stab_matrix(self) -> np.ndarray:
        n = self.n
        return np.concatenate([self.x[n:], self.z[n:]], axis=1)

    def canonical_key(self) -> bytes:
        """Row-reduced, sign-normalised generator set; equal iff same state."""
        xs, zs, rs = _reduce_rows(self.x[self.n:], self.z[self.n:], self.r[self.n:],
                                  list(range(2 * self.n)))
        signs = (rs - np.sum(xs & zs, axis=1)) % 4
        return (np.packbits(np.concatenate([xs, zs], axis=1)).tobytes()
                + bytes(signs.astype(np.uint8).tolist()) + bytes([self.n]))

    def same_state(self, other: "StabilizerTableau") -> bool:
        return self.n == other.n and self.canonical_key() == other.canonical_key()

    def __repr__(self):
        return f"StabilizerTableau(n={self.n}, stabs=[{', '.join(str(p) for p in self.stab_rows)}])"


def _destabilizers(sx, sz):
    """Paulis d_i with {d_i, s_j} anticommuting iff i == j and mutually commuting."""
    n = sx.shape[0]
    # <d, s_j> = d_x . s_jz + d_z . s_jx ; solve [Sz | Sx] @ [d_x; d_z] = e_j
    mt = np.concatenate([sz, sx], axis=1)
    sol = gf2.solve(mt, np.eye(n, dtype=np.uint8))
    assert sol is not None
    d = sol.T.copy()
    dx, dz = d[:, :n].copy(), d[:, n:].copy()
    for i in range(n):
        for j in range(i + 1, n):
            s = (int(dx[i].astype(np.int64) @ dz[j]) + int(dz[i].astype(np.int64) @ dx[j])) % 2
            if s:
                dx[j] ^= sx[i]
                dz[j] ^= sz[i]
    return dx, dz


def _reduce_rows(x, z, r, col_order):
    """Gaussian elimination of Pauli rows (with phases) over the given column order.

    Columns 0..n-1 index x bits, n..2n-1 z bits.
    """
    x = x.copy()
    z = z.copy()
    r = r.copy()
    n = x.shape[1]
    m = x.shape[0]
    row = 0
    for c in col_order:
        if row >= m:
            break
        col = x[:, c] if c < n else z[:, c - n]
        nz = np.nonzero(col[row:])[0]
        if nz.size == 0:
            continue
        p = row + nz[0]
        if p != row:
            x[[row, p]] = x[[p, row]]
            z[[row, p]] = z[[p, row]]
            r[[row, p]] = r[[p, row]]
        col = x[:, c] if c < n else z[:, c - n]
        for i in np.nonzero(col)[0]:
            if i == row:
                continue
            x[i], z[i], r[i] = _row_product(x[i], z[i], r[i], x[row], z[row], r[row])
        row += 1
    return x, z, r


# ---------------------------------------------------------------------------
# pure operations


def apply_clifford(t: StabilizerTableau, gate: str, *qubits) -> StabilizerTableau:
    return t.copy().apply_(gate, *qubits)


def measure_pauli(t: StabilizerTableau, p: PauliString, forced_outcome=None, rng=None):
    out = t.copy()
    outcome, prob = out.measure_(p, forced=forced_outcome, rng=rng)
    if prob == 0:
        return outcome, prob, t.copy()
    return outcome, prob, out


def overlap_probability(t: StabilizerTableau, projector: Sequence[PauliString]) -> Fraction:
    """Tr[prod_k (1+P_k)/2 |psi><psi|] for commuting Hermitian P_k."""
    for i, a in enumerate(projector):
        for b in projector[i + 1:]:
            if not a.commutes(b):
                raise ValueError("projector Paulis must commute")
    w = t.copy()
    prob = Fraction(1)
    for p in projector:
        _, pr = w.measure_(p, forced=1)
        prob *= pr
        if prob == 0:
            return prob
    return prob


def tensor(a: StabilizerTableau, b: StabilizerTableau) -> StabilizerTableau:
    na, nb = a.n, b.n
    n = na + nb

    def blk(ma, mb):
        out = np.zeros((2 * n, n), dtype=np.uint8)
        out[:na, :na] = ma[:na]
        out[na:n, na:] = mb[:nb]
        out[n:n + na, :na] = ma[na:]
        out[n + na:, na:] = mb[nb:]
        return out

    r = np.concatenate([a.r[:na], b.r[:nb], a.r[na:], b.r[nb:]])
    return StabilizerTableau(blk(a.x, b.x), blk(a.z, b.z), r)


def subgroup_on(t: StabilizerTableau, qubits: Sequence[int]):
    """Generators (x, z, r arrays) of the stabiliser subgroup supported on ``qubits``."""
    n = t.n
    qs = set(qubits)
    other = [q for q in range(n) if q not in qs]
    order = other + [n + q for q in other]
    x, z, r = _reduce_rows(t.x[n:], t.z[n:], t.r[n:], order)
    keep = [i for i in range(n) if not (np.any(x[i, other]) or np.any(z[i, other]))]
    return x[keep], z[keep], r[keep]


def entanglement_rank(t: StabilizerTableau, a_qubits: Sequence[int]) -> int:
    """Number of Bell pairs across the cut: rank of the A-restricted stabiliser matrix minus |A|."""
    n = t.n
    a = list(a_qubits)
    m = np.concatenate([t.x[n:][:, a], t.z[n:][:, a]], axis=1)
    return gf2.rank(m) - len(a)


def drop_qubits(t: StabilizerTableau, qubits: Sequence[int]) -> StabilizerTableau:
    """Remove qubits that are in |0> and unentangled with the rest."""
    n = t.n
    drop = sorted(set(qubits))
    keep = [q for q in range(n) if q not in drop]
    for q in drop:
        if t.expectation(PauliString.single(n, q, "Z")) != 1:
            raise ValueError(f"qubit {q} is not in |0>")
    # eliminate Z on dropped qubits using the Z_q elements themselves
    order = [n + q for q in drop] + [q for q in drop] + list(range(2 * n))
    x, z, r = _reduce_rows(t.x[n:], t.z[n:], t.r[n:], order)
    rows = [i for i in range(n) if not (np.any(x[i, drop]) or np.any(z[i, drop]))]
    assert len(rows) == len(keep)
    gens = [(x[i, keep], z[i, keep], r[i]) for i in rows]
    return StabilizerTableau.from_stabilizers(gens)


def permute_qubits(t: StabilizerTableau, order: Sequence[int]) -> StabilizerTableau:
    """New tableau whose qubit j is old qubit order[j]."""
    order = list(order)
    return StabilizerTableau(t.x[:, order], t.z[:, order], t.r.copy())


# ---------------------------------------------------------------------------
# dense conversion


def _apply_pauli_vec(v, x, z, r, n):
    """(i^r X^x Z^z) v with qubit 0 as the most significant index bit."""
    idx = np.arange(2 ** n)
    zmask = gf2.bits_to_int(z)
    xmask = gf2.bits_to_int(x)
    par = np.array([bin(i & zmask).count("1") & 1 for i in range(2 ** n)]) if zmask else 0
    w = v * (1 - 2 * par)
    w = w[idx ^ xmask]
    return (1j ** int(r)) * w


def tableau_to_dense(t: StabilizerTableau) -> np.ndarray:
    """State vector (global phase fixed so the first non-zero amplitude is real positive)."""
    n = t.n
    if n > 12:
        raise ValueError("dense conversion limited to 12 qubits")
    w = t.copy()
    bits = []
    for q in range(n):
        out, _ = w.measure_(PauliString.single(n, q, "Z"), forced=1 if
                            w.expectation(PauliString.single(n, q, "Z")) == 0 else None)
        bits.append(0 if out == 1 else 1)
    v = np.zeros(2 ** n, dtype=complex)
    v[gf2.bits_to_int(bits)] = 1.0
    for i in range(n, 2 * n):
        v = 0.5 * (v + _apply_pauli_vec(v, t.x[i], t.z[i], t.r[i], n))
    v /= np.linalg.norm(v)
    k = np.flatnonzero(np.abs(v) > 1e-9)[0]
    return v * (abs(v[k]) / v[k])


def stabilizer_group(t: StabilizerTableau):
    """All 2^n group elements as (x, z, r) arrays in XZ form."""
    n = t.n
    x = np.zeros((1, n), dtype=np.uint8)
    z = np.zeros((1, n), dtype=np.uint8)
    r = np.zeros(1, dtype=np.int64)
    for i in range(n, 2 * n):
        gx, gz, gr = t.x[i], t.z[i], t.r[i]
        nr = (r + gr + 2 * (z.astype(np.int64) @ gx.astype(np.int64))) % 4
        x = np.concatenate([x, x ^ gx])
        z = np.concatenate([z, z ^ gz])
        r = np.concatenate([r, nr])
    return x, z, r


# ---------------------------------------------------------------------------
# Bell post-selection


def bell_projector_paulis(n_total: int, left: Sequence[int], right: Sequence[int]):
    ps = []
    for a, b in zip(left, right):
        xs = [0] * n_total
        zs = [0] * n_total
        xs[a] = xs[b] = 1
        ps.append(PauliString(tuple(xs), (0,) * n_total))
        ps.append(PauliString((0,) * n_total, tuple(1 if q in (a, b) else 0 for q in range(n_total))))
    return ps


def apply_choi_branch_(state: StabilizerTableau, resource: StabilizerTableau,
                       support: Sequence[int]):
    """Apply the map whose (pure) Choi state is ``resource`` to ``support`` of ``state``.

    resource has 2m qubits: the first m are the output, the last m the
    reference. Returns (probability, new tableau) where probability is
    ||(1 (x) <Omega|)(|resource> (x) |state>)||^2; multiply by 4^m to get
    the trace of the (unnormalised) output of the map K with Choi state
    |resource><resource|/... i.e. K|j> = 2^(m/2) <j|_ref |resource>.
    """
    m = resource.n // 2
    support = list(support)
    if len(support) != m:
        raise ValueError("support size must match resource")
    n = state.n
    big = tensor(state, resource)
    out_q = [n + i for i in range(m)]
    ref_q = [n + m + i for i in range(m)]
    prob = Fraction(1)
    for p in bell_projector_paulis(n + 2 * m, ref_q, support):
        _, pr = big.measure_(p, forced=1)
        prob *= pr
        if prob == 0:
            return prob, None
    for a, s in zip(out_q, support):
        big.apply_("SWAP", a, s)
    for a, b in zip(out_q, ref_q):
        big.apply_("CNOT", b, a)
        big.apply_("H", b)
    return prob, drop_qubits(big, out_q + ref_q)


def postselect_bell(resource: StabilizerTableau, inp: StabilizerTableau):
    """Post-selected Bell measurement between the reference half of ``resource`` and ``inp``.

    Returns (probability, output tableau on m qubits); output is None when
    the probability is zero.
    """
    if resource.n != 2 * inp.n:
        raise ValueError("resource must have twice the input qubits")
    return apply_choi_branch_(inp, resource, list(range(inp.n)))


# ---------------------------------------------------------------------------
# bipartite normal form


@dataclass
class BipartiteNormalForm:
    a_qubits: tuple
    b_qubits: tuple
    gates_a: list
    gates_b: list
    p: int
    pairs: list
    residual_a: StabilizerTableau
    residual_b: StabilizerTableau
    fixed_a: list = field(default_factory=list)
    fixed_b: list = field(default_factory=list)


def _to_z(t, g, q_target, support, log, extra_rows=()):
    """Map Pauli row g (on ``support``) to +-Z_q_target with H/S/CNOT/SWAP gates."""
    gx, gz = g
    gates = []
    for s in support:
        if gx[s] and gz[s]:
            gates += [("S", (s,)), ("H", (s,))]
        elif gx[s]:
            gates.append(("H", (s,)))
    if q_target not in support:
        gates.append(("SWAP", (support[0], q_target)))
        support = [q_target if s == support[0] else s for s in support]
    for s in support:
        if s != q_target:
            gates.append(("CNOT", (s, q_target)))
    for gname, qs in gates:
        t.apply_(gname, *qs)
        for rows in extra_rows:
            _rows_gate(*rows, gname, qs)
    log.extend(gates)


def _encode_local_group(t, side, log, prefer_high=True):
    """Map the stabiliser subgroup supported on ``side`` to +Z on some of its qubits.

    Returns the list of qubits now fixed to |0>.
    """
    x, z, r = subgroup_on(t, side)
    rows = [x, z, r]
    fixed = []
    for k in range(x.shape[0]):
        gx, gz = rows[0][k], rows[1][k]
        supp = [q for q in side if (gx[q] or gz[q]) and q not in fixed]
        assert supp, "dependent generators"
        q = max(supp) if prefer_high else min(supp)
        _to_z(t, (gx.copy(), gz.copy()), q, supp, log, extra_rows=(rows,))
        sign = (rows[2][k] - int(np.sum(rows[0][k] & rows[1][k]))) % 4
        if sign == 2:
            t.apply_("X", q)
            _rows_gate(*rows, "X", (q,))
            log.append(("X", (q,)))
        # clear z_q from later generators
        for j in range(k + 1, x.shape[0]):
            if rows[1][j][q]:
                rows[0][j], rows[1][j], rows[2][j] = _row_product(
                    rows[0][j], rows[1][j], rows[2][j], rows[0][k], rows[1][k], rows[2][k])
        fixed.append(q)
    return fixed


def _element_with_part(t, part_qubits, target_x, target_z, clear):
    """Group element whose restriction to ``part_qubits`` equals the target Pauli."""
    n = t.n
    sx, sz, sr = t.x[n:], t.z[n:], t.r[n:]
    m = np.concatenate([sx[:, part_qubits], sz[:, part_qubits]], axis=1)
    c = gf2.solve(m.T, np.concatenate([target_x, target_z]))
    assert c is not None
    ax = np.zeros(n, dtype=np.uint8)
    az = np.zeros(n, dtype=np.uint8)
    ar = 0
    for i in np.nonzero(c)[0]:
        ax, az, ar = _row_product(ax, az, ar, sx[i], sz[i], sr[i])
    for q in clear:
        az[q] = 0
    return ax, az, ar


def fattal_normal_form(t: StabilizerTableau, a_qubits: Sequence[int],
                       b_qubits: Sequence[int] | None = None) -> BipartiteNormalForm:
    """Local Clifford circuits on each side reducing the state to Bell pairs times |0...0>.

    Bell pairs are formed between the lowest-indexed free qubits of each side.
    """
    n = t.n
    a = sorted(a_qubits)
    b = sorted(b_qubits) if b_qubits is not None else [q for q in range(n) if q not in a]
    if sorted(a + b) != list(range(n)):
        raise ValueError("cut must partition the qubits")
    w = t.copy()
    log_a, log_b = [], []
    fixed_a = _encode_local_group(w, a, log_a)
    fixed_b = _encode_local_group(w, b, log_b)
    free_a = [q for q in a if q not in fixed_a]
    free_b = [q for q in b if q not in fixed_b]
    p = len(free_a)
    assert p == len(free_b)
    clear = fixed_a + fixed_b
    pairs = []
    for i in range(p):
        qa, qb = free_a[i], free_b[i]
        rest_a = free_a[i:]
        tx = np.zeros(len(b), dtype=np.uint8)
        tz = np.zeros(len(b), dtype=np.uint8)
        tz[b.index(qb)] = 1
        gx, gz, _ = _element_with_part(w, b, tx, tz, clear)
        supp = [q for q in rest_a if gx[q] or gz[q]]
        _to_z(w, (gx, gz), qa, supp, log_a)
        tz[:] = 0
        tx[b.index(qb)] = 1
        gx, gz, _ = _element_with_part(w, b, tx, tz, clear)
        assert gx[qa] == 1
        gates = []
        for s in rest_a:
            if s == qa or not (gx[s] or gz[s]):
                continue
            if gz[s] and not gx[s]:
                gates.append(("H", (s,)))
            elif gz[s] and gx[s]:
                gates.append(("S", (s,)))
            gates.append(("CNOT", (qa, s)))
        if gz[qa]:
            gates.append(("SDG", (qa,)))
        for g, qs in gates:
            w.apply_(g, *qs)
        log_a.extend(gates)
        zz = PauliString((0,) * n, tuple(1 if q in (qa, qb) else 0 for q in range(n)))
        xx = PauliString(tuple(1 if q in (qa, qb) else 0 for q in range(n)), (0,) * n)
        if w.expectation(zz) == -1:
            w.apply_("X", qa)
            log_a.append(("X", (qa,)))
        if w.expectation(xx) == -1:
            w.apply_("Z", qa)
            log_a.append(("Z", (qa,)))
        assert w.expectation(zz) == 1 and w.expectation(xx) == 1
        pairs.append((qa, qb))
    return BipartiteNormalForm(tuple(a), tuple(b), log_a, log_b, p, pairs,
                               StabilizerTableau.zero_state(len(fixed_a)),
                               StabilizerTableau.zero_state(len(fixed_b)),
                               sorted(fixed_a), sorted(fixed_b))


def concentrate_entanglement(t: StabilizerTableau, a_qubits: Sequence[int], m: int):
    """Clifford on the complement of A that moves all entanglement with A onto m qubits.

    Returns (gates, b_qubits, c_qubits, tableau_after). After the gates the
    state is |phi_AB> (x) |0...0>_C. B holds the lowest-indexed qubits that
    remain entangled, padded with the lowest-indexed others up to m (or
    fewer when the complement is small).
    """
    n = t.n
    a = sorted(a_qubits)
    rest = [q for q in range(n) if q not in a]
    w = t.copy()
    log = []
    fixed = _encode_local_group(w, rest, log)
    free = [q for q in rest if q not in fixed]
    if len(free) > m:
        raise ValueError("entanglement exceeds B size")
    pad = [q for q in rest if q not in free][: max(0, min(m, len(rest)) - len(free))]
    bq = sorted(free + pad)
    cq = [q for q in rest if q not in bq]
    return log, bq, cq, w
