"""Quantum channels in Kraus form, Choi states and a builder zoo.

Choi convention: Phi_E = (E (x) 1)|Omega><Omega| with
|Omega> = 2^(-n/2) sum_j |j>_A |j>_B. Subsystem A (the channel output) is the
first n qubits, B (the reference) the last n.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pauli_basis import pauli_vector

EPS_MAT = 1e-10


@dataclass(frozen=True, eq=False)
class KrausChannel:
    kraus_ops: tuple
    name: str = ""
    check_tp: bool = True

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise ValueError("need at least one Kraus operator")
        d = ops[0].shape[0]
        n = int(round(np.log2(d)))
        if 2 ** n != d:
            raise ValueError("Kraus operators must be 2^n x 2^n")
        for k in ops:
            if k.shape != (d, d):
                raise ValueError("inconsistent Kraus operator shapes")
        object.__setattr__(self, "kraus_ops", ops)
        if self.check_tp and not self.trace_preserving:
            raise ValueError("Kraus operators are not trace preserving")

    @property
    def n(self) -> int:
        return int(round(np.log2(self.kraus_ops[0].shape[0])))

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    @property
    def trace_preserving(self) -> bool:
        s = sum(k.conj().T @ k for k in self.kraus_ops)
        return bool(np.allclose(s, np.eye(self.dim), atol=EPS_MAT, rtol=0))

    @property
    def is_diagonal(self) -> bool:
        for k in self.kraus_ops:
            if np.any(k - np.diag(np.diag(k))):
                return False
        return True

    def __call__(self, rho):
        return sum(k @ rho @ k.conj().T for k in self.kraus_ops)

    def __repr__(self):
        return f"KrausChannel({self.name or 'kraus'}, n={self.n}, ops={len(self.kraus_ops)})"


@dataclass(frozen=True, eq=False)
class ChoiState:
    n: int
    rho: np.ndarray
    pauli_vector: np.ndarray

    def marginal_b(self):
        d = 2 ** self.n
        return np.trace(self.rho.reshape(d, d, d, d), axis1=0, axis2=2)


def omega_vector(n: int) -> np.ndarray:
    d = 2 ** n
    return np.eye(d).ravel() / np.sqrt(d)


def choi_of(ch: KrausChannel) -> ChoiState:
    d = ch.dim
    rho = np.zeros((d * d, d * d), dtype=complex)
    for k in ch.kraus_ops:
        v = (k / np.sqrt(d)).ravel()
        rho += np.outer(v, v.conj())
    return ChoiState(ch.n, rho, pauli_vector(rho))


def channel_from_choi(rho: np.ndarray, tol: float = 1e-12) -> KrausChannel:
    """Kraus form of the CP map with the given Choi matrix (inverse of choi_of)."""
    dd = rho.shape[0]
    d = int(round(np.sqrt(dd)))
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    ops = [np.sqrt(d * lam) * v[:, i].reshape(d, d) for i, lam in enumerate(w) if lam > tol]
    return KrausChannel(tuple(ops), check_tp=False)


def cj_trace_identity_check(ch: KrausChannel, a, rho):
    """(Tr[A E(rho)], 2^n Tr[Phi (A (x) rho^T)])."""
    lhs = np.trace(a @ ch(rho))
    phi = choi_of(ch).rho
    rhs = ch.dim * np.trace(phi @ np.kron(a, rho.T))
    return lhs, rhs


def compose(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    """a after b."""
    if a.n != b.n:
        raise ValueError("qubit count mismatch")
    ops = [ka @ kb for ka in a.kraus_ops for kb in b.kraus_ops]
    ops = [k for k in ops if np.linalg.norm(k) > EPS_MAT]
    name = f"{a.name}*{b.name}" if a.name and b.name else ""
    return KrausChannel(tuple(ops), name=name, check_tp=a.check_tp and b.check_tp)


def tensor(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    ops = [np.kron(ka, kb) for ka in a.kraus_ops for kb in b.kraus_ops]
    name = f"{a.name}(x){b.name}" if a.name and b.name else ""
    return KrausChannel(tuple(ops), name=name, check_tp=a.check_tp and b.check_tp)


def mixture(chs: Sequence[KrausChannel], weights: Sequence[float]) -> KrausChannel:
    ops = []
    for ch, w in zip(chs, weights):
        if w > 0:
            ops += [np.sqrt(w) * k for k in ch.kraus_ops]
    return KrausChannel(tuple(ops))


def simplify(ch: KrausChannel) -> KrausChannel:
    """Minimal Kraus representation via the Choi eigendecomposition."""
    out = channel_from_choi(choi_of(ch).rho)
    return KrausChannel(out.kraus_ops, name=ch.name, check_tp=ch.check_tp)


# ---------------------------------------------------------------------------
# dense application


def apply_operator(op, state, support, total_n, density=True):
    """Apply op (on len(support) qubits) to a vector or density matrix on total_n qubits."""
    support = list(support)
    m = len(support)
    opt = np.asarray(op).reshape((2,) * (2 * m))
    if density:
        t = np.asarray(state).reshape((2,) * (2 * total_n))
        # left multiply
        t = np.tensordot(opt, t, axes=(list(range(m, 2 * m)), support))
        t = np.moveaxis(t, list(range(m)), support)
        # right multiply by op^dagger on column indices
        cols = [total_n + q for q in support]
        t = np.tensordot(t, opt.conj(), axes=(cols, list(range(m, 2 * m))))
        t = np.moveaxis(t, list(range(2 * total_n - m, 2 * total_n)), cols)
        return t.reshape(2 ** total_n, 2 ** total_n)
    t = np.asarray(state).reshape((2,) * total_n)
    t = np.tensordot(opt, t, axes=(list(range(m, 2 * m)), support))
    t = np.moveaxis(t, list(range(m)), support)
    return t.reshape(2 ** total_n)


def apply_dense(ch: KrausChannel, rho, support=None, total_n=None):
    if support is None:
        return ch(rho)
    if len(support) != ch.n:
        raise ValueError("support size must match channel")
    if total_n is None:
        total_n = int(round(np.log2(np.asarray(rho).shape[0])))
    return sum(apply_operator(k, rho, support, total_n) for k in ch.kraus_ops)


# ---------------------------------------------------------------------------
# builders

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1.0 + 0j, -1.0])
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)
T_MAT = np.diag([1, np.exp(1j * np.pi / 4)])
KET_T = T_MAT @ KET_PLUS
KET_T_PERP = T_MAT @ KET_MINUS


def unitary_channel(u, name="") -> KrausChannel:
    return KrausChannel((np.asarray(u, dtype=complex),), name=name)


def identity(n=1) -> KrausChannel:
    return unitary_channel(np.eye(2 ** n), name=f"identity{n}")


def t_gate() -> KrausChannel:
    return unitary_channel(T_MAT, "t_gate")


def s_gate() -> KrausChannel:
    return unitary_channel(np.diag([1, 1j]), "s_gate")


def hadamard() -> KrausChannel:
    return unitary_channel(_H, "hadamard")


def pauli_gate(letter: str) -> KrausChannel:
    return unitary_channel({"I": np.eye(2), "X": _X, "Y": _Y, "Z": _Z}[letter], letter)


def cz() -> KrausChannel:
    return unitary_channel(np.diag([1, 1, 1, -1]), "cz")


def cnot() -> KrausChannel:
    u = np.eye(4)[[0, 1, 3, 2]]
    return unitary_channel(u, "cnot")


def cs() -> KrausChannel:
    return unitary_channel(np.diag([1, 1, 1, 1j]), "cs")


def ccz() -> KrausChannel:
    return unitary_channel(np.diag([1] * 7 + [-1]), "ccz")


def z_rotation(theta: float) -> KrausChannel:
    """exp(i Z theta)."""
    return unitary_channel(np.diag([np.exp(1j * theta), np.exp(-1j * theta)]), "z_rotation")


def x_rotation(theta: float) -> KrausChannel:
    """exp(i X theta)."""
    u = np.cos(theta) * np.eye(2) + 1j * np.sin(theta) * _X
    return unitary_channel(u, "x_rotation")


def amplitude_damping(p: float) -> KrausChannel:
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    k1 = np.diag([1, np.sqrt(1 - p)])
    k2 = np.array([[0, np.sqrt(p)], [0, 0]])
    return KrausChannel((k1, k2), name="amplitude_damping")


def multicontrol_phase(t: int, n: int) -> KrausChannel:
    """diag(e^(i pi / 2^t), 1, ..., 1): the phase sits on |0...0>."""
    d = np.ones(2 ** n, dtype=complex)
    d[0] = np.exp(1j * np.pi / 2 ** t)
    return unitary_channel(np.diag(d), f"multicontrol_phase({t},{n})")


def diagonal_unitary(phases) -> KrausChannel:
    phases = np.asarray(phases, dtype=float)
    return unitary_channel(np.diag(np.exp(1j * phases)), "diagonal_unitary")


def random_diagonal_unitary(n: int, rng) -> KrausChannel:
    return diagonal_unitary(rng.uniform(0, 2 * np.pi, 2 ** n))


_RESET_STATES = {
    "+Z": KET0, "-Z": KET1, "+X": KET_PLUS, "-X": KET_MINUS,
    "+Y": np.array([1, 1j]) / np.sqrt(2), "-Y": np.array([1, -1j]) / np.sqrt(2),
}


def pauli_reset(target: str = "+Z") -> KrausChannel:
    """Reset to the +1 eigenstate of the signed Pauli ``target`` (e.g. "-X")."""
    s = _RESET_STATES[target]
    ops = (np.outer(s, KET0.conj()), np.outer(s, KET1.conj()))
    return KrausChannel(ops, name=f"reset{target}")


def hadamard_conditional() -> KrausChannel:
    """Measure Z; on outcome 1 apply H: {|0><0|, |-><1|}."""
    return KrausChannel((np.outer(KET0, KET0), np.outer(KET_MINUS, KET1)), name="hadamard_conditional")


def measure_t_basis() -> KrausChannel:
    """{|0><T|, |1><T_perp|}."""
    return KrausChannel((np.outer(KET0, KET_T.conj()), np.outer(KET1, KET_T_PERP.conj())),
                        name="measure_t_basis")


def z_reset_channel() -> KrausChannel:
    """{|0><0|, |0><1|}."""
    return KrausChannel((np.outer(KET0, KET0), np.outer(KET0, KET1)), name="z_reset")


def t_prepare_conditional() -> KrausChannel:
    """{|T><0|, |1><1|}."""
    return KrausChannel((np.outer(KET_T, KET0), np.outer(KET1, KET1)), name="t_prepare_conditional")


def depolarizing(p: float, n: int = 1) -> KrausChannel:
    import itertools
    d = 2 ** n
    paulis = [np.eye(2), _X, _Y, _Z]
    ops = []
    for idx in itertools.product(range(4), repeat=n):
        m = np.array([[1.0 + 0j]])
        for i in idx:
            m = np.kron(m, paulis[i])
        w = (1 - p + p / d ** 2) if not any(idx) else p / d ** 2
        if w > 0:
            ops.append(np.sqrt(w) * m)
    return KrausChannel(tuple(ops), name="depolarizing")


def random_unitary(d: int, rng) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_channel(n: int, rng, rank: int | None = None) -> KrausChannel:
    """Random CPTP map from a Haar-ish random isometry (Stinespring)."""
    d = 2 ** n
    k = rank or int(rng.integers(1, d * d + 1))
    a = rng.normal(size=(d * k, d)) + 1j * rng.normal(size=(d * k, d))
    q, _ = np.linalg.qr(a)
    ops = tuple(q[i * d:(i + 1) * d] for i in range(k))
    return KrausChannel(ops, name="random")


_SINGLE_CLIFFORD_GATES = {"H": _H, "S": np.diag([1, 1j]), "SDG": np.diag([1, -1j]),
                          "X": _X, "Y": _Y, "Z": _Z}


def clifford_unitary(gates, n: int) -> KrausChannel:
    """Unitary channel of a gate list [(name, qubits), ...] in the tableau gate set."""
    u = np.eye(2 ** n, dtype=complex)
    for g, qs in gates:
        g = g.upper()
        if g in _SINGLE_CLIFFORD_GATES:
            op = _SINGLE_CLIFFORD_GATES[g]
        elif g in ("CNOT", "CX"):
            op = np.eye(4)[[0, 1, 3, 2]]
        elif g == "CZ":
            op = np.diag([1, 1, 1, -1])
        elif g == "SWAP":
            op = np.eye(4)[[0, 2, 1, 3]]
        else:
            raise ValueError(f"unknown gate {g}")
        cols = [apply_operator(op, u[:, j], qs, n, density=False) for j in range(2 ** n)]
        u = np.array(cols).T
    return unitary_channel(u, "clifford")


# ---------------------------------------------------------------------------
# JSON

NAMED = {
    "identity": lambda n=1: identity(n),
    "t_gate": t_gate,
    "s_gate": s_gate,
    "hadamard": hadamard,
    "pauli_x": lambda: pauli_gate("X"),
    "pauli_y": lambda: pauli_gate("Y"),
    "pauli_z": lambda: pauli_gate("Z"),
    "cnot": cnot,
    "cz": cz,
    "cs": cs,
    "ccz": ccz,
    "z_rotation": z_rotation,
    "x_rotation": x_rotation,
    "amplitude_damping": amplitude_damping,
    "multicontrol_phase": multicontrol_phase,
    "diagonal_unitary": diagonal_unitary,
    "pauli_reset": pauli_reset,
    "hadamard_conditional": hadamard_conditional,
    "measure_t_basis": measure_t_basis,
    "z_reset": z_reset_channel,
    "t_prepare_conditional": t_prepare_conditional,
    "depolarizing": depolarizing,
}


class ChannelParseError(ValueError):
    pass


def channel_from_json(obj) -> KrausChannel:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ChannelParseError("channel JSON needs a 'kind' field")
    kind = obj["kind"]
    try:
        if kind == "named":
            name = obj["name"]
            if name not in NAMED:
                raise ChannelParseError(f"unknown channel name {name!r}")
            params = dict(obj.get("params", {}))
            if name == "identity" and "n" in obj and "n" not in params:
                params["n"] = obj["n"]
            ch = NAMED[name](**params)
        elif kind == "kraus":
            ops = [np.array([[complex(e[0], e[1]) for e in row] for row in op]) for op in obj["ops"]]
            ch = KrausChannel(tuple(ops), name=obj.get("name", "kraus"))
        else:
            raise ChannelParseError(f"unknown channel kind {kind!r}")
    except ChannelParseError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ChannelParseError(str(e)) from e
    if "n" in obj and int(obj["n"]) != ch.n:
        raise ChannelParseError(f"declared n={obj['n']} but operators act on {ch.n} qubits")
    return ch


def channel_to_json(ch: KrausChannel) -> dict:
    ops = [[[[float(v.real), float(v.imag)] for v in row] for row in k] for k in ch.kraus_ops]
    return {"kind": "kraus", "n": ch.n, "name": ch.name, "ops": ops}
