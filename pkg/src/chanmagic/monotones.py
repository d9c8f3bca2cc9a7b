"""Magic monotones for states and channels, all computed by linear programming.

R(rho)       robustness of magic of a state
R(Phi_E)     robustness of the Choi state
R*(E)        channel robustness: decompositions into completely
             stabiliser-preserving trace-preserving maps
C(E)         magic capacity: max output robustness over stabiliser inputs
R_CPR(E)     robustness over Clifford unitaries and Pauli resets
"""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import channels as chmod
from . import symmetry as sym
from .channels import KrausChannel, choi_of
from .lp import EPS_LP, DenseSource, LPError, StabPairSource, solve_lp
from .pauli_basis import density_from_pauli_vector, pauli_vector, z_type_indices
from .pauli_tableau import StabilizerTableau, tableau_to_dense, tensor
from .stab_catalog import (
    capacity_input_set,
    enumerate_states,
    reduced_state_classes,
    tableau_pauli_vector,
)

MAX_STATE_QUBITS = 5
MAX_GENERAL_CHANNEL_QUBITS = 2
MAX_DIAGONAL_CHANNEL_QUBITS = 5
# catalogue size from which LPs are solved in the permutation-symmetric subspace
SYMMETRIC_FROM_QUBITS = 5


class SizeLimitError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass
class QuasiDecomposition:
    basis: str  # "stab{n}" or "cpr{n}"
    basis_refs: np.ndarray
    coefficients: np.ndarray

    @property
    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.coefficients)))

    @property
    def p(self) -> float:
        return (self.l1_norm - 1) / 2

    def reconstruct(self, catalog) -> np.ndarray:
        v = np.zeros(4 ** catalog.n)
        for j, q in zip(self.basis_refs, self.coefficients):
            v += q * catalog.column(int(j))
        return v


@dataclass
class Witness:
    W: np.ndarray
    y: np.ndarray  # Pauli coefficients: W = sum_P y_P P - 1

    def value(self, rho) -> float:
        return float(np.real(np.trace(self.W @ rho)))


@dataclass
class RobustnessResult:
    value: float
    decomposition: QuasiDecomposition
    witness: Witness | None = None
    iterations: int = 0
    duality_gap: float = 0.0
    lp_objective: float = 0.0


def _check_lp(res):
    if res.status == "infeasible":
        raise SolverError("LP infeasible")
    if res.status != "optimal":
        raise SolverError(f"LP failed: {res.status}")


def _snap(value: float) -> float:
    """Values within the LP tolerance of 1 are stabiliser: report exactly 1."""
    return 1.0 if value < 1 + EPS_LP else value


@dataclass
class _CatalogLP:
    status: str
    objective: float
    plus: tuple  # (catalogue indices, weights)
    minus: tuple
    y: np.ndarray  # dual on the 4^n Pauli rows followed by the extra rows
    iterations: int = 0


_REDUCED: dict = {}


def _reduced(cat, perms, extra):
    key = (cat.n, len(cat), tuple(perms), tuple(extra.tolist()))
    if key not in _REDUCED:
        cls, r = sym.pauli_orbits(cat.n, perms)
        _REDUCED.clear()  # one five-qubit reduction at a time keeps memory bounded
        _REDUCED[key] = sym.reduce_catalog(cat, cls, r)
    return _REDUCED[key]


def _sparse(x, tol=1e-13):
    sup = np.flatnonzero(np.abs(x) > tol)
    return sup, x[sup]


def _catalog_lp(cat, b, extra=None, positive_only=False, backend="simplex", symmetric=None) -> _CatalogLP:
    """min sum x over +/- catalogue columns with A x = b and, on the + part, A[extra] x = 0."""
    extra = np.zeros(0, dtype=np.int64) if extra is None else np.asarray(extra, dtype=np.int64)
    if symmetric is None:
        symmetric = cat.n >= SYMMETRIC_FROM_QUBITS
    perms = sym.invariant_permutations(b, cat.n, fixed_sets=(extra,)) if symmetric else []
    rhs = np.concatenate([b, np.zeros(extra.size)])
    try:
        if len(perms) <= 1:
            res = solve_lp(StabPairSource(cat, extra_rows=extra, positive_only=positive_only), rhs, backend=backend)
            nc = len(cat)
            minus = _sparse(res.x[nc:]) if not positive_only else _sparse(np.zeros(0))
            return _CatalogLP(res.status, res.objective, _sparse(res.x[:nc]), minus, res.y, res.iterations)
        red = _reduced(cat, perms, extra)
        f = red.features.T  # R x U
        ecls = np.unique(red.cls[extra]) if extra.size else np.zeros(0, dtype=np.int64)
        top = np.hstack([f, -f]) if not positive_only else f
        rows = [top]
        if ecls.size:
            fe = f[ecls]
            rows.append(np.hstack([fe, np.zeros_like(fe)]) if not positive_only else fe)
        a = np.vstack(rows)
        rb = np.concatenate([sym.class_sums(b, red.cls, red.n_classes), np.zeros(ecls.size)])
        res = solve_lp(DenseSource(a), rb, backend=backend)
    except LPError as e:
        raise SolverError(str(e)) from e
    u = red.size
    y = np.zeros(b.size + extra.size)
    if res.status == "optimal":
        y[:b.size] = res.y[red.cls]
        if ecls.size:
            where = {c: i for i, c in enumerate(ecls)}
            y[b.size:] = res.y[red.n_classes + np.array([where[c] for c in red.cls[extra]])]
        plus = sym.expand(red, res.x[:u])
        minus = sym.expand(red, res.x[u:]) if not positive_only else _sparse(np.zeros(0))
    else:
        plus = minus = _sparse(np.zeros(0))
    return _CatalogLP(res.status, res.objective, plus, minus, y, res.iterations)


def robustness_from_pauli_vector(b: np.ndarray, nq: int, backend="simplex", witness=True,
                                 symmetric=None) -> RobustnessResult:
    """R from a Pauli vector. symmetric=None reduces by qubit-permutation
    symmetry on five qubits only; True/False forces the choice."""
    if nq > MAX_STATE_QUBITS:
        raise SizeLimitError(f"robustness limited to {MAX_STATE_QUBITS} qubits")
    cat = enumerate_states(nq)
    res = _catalog_lp(cat, b, backend=backend, symmetric=symmetric)
    _check_lp(res)
    (pr, pw), (mr, mw) = res.plus, res.minus
    refs, inv = np.unique(np.concatenate([pr, mr]), return_inverse=True)
    coef = np.zeros(refs.size)
    np.add.at(coef, inv, np.concatenate([pw, -mw]))
    keep = np.abs(coef) > 1e-13
    dec = QuasiDecomposition(f"stab{nq}", refs[keep], coef[keep])
    dual = float(b @ res.y)
    wit = None
    if witness:
        d = 2 ** nq
        W = d * density_from_pauli_vector(res.y) - np.eye(d)
        wit = Witness(W, res.y)
    return RobustnessResult(_snap(res.objective), dec, wit, res.iterations,
                            res.objective - dual, res.objective)


def robustness_of_magic(rho, backend="simplex", witness=True) -> RobustnessResult:
    rho = np.asarray(rho)
    nq = int(round(np.log2(rho.shape[0])))
    return robustness_from_pauli_vector(pauli_vector(rho), nq, backend, witness)


def plus_state_density(n: int) -> np.ndarray:
    d = 2 ** n
    return np.full((d, d), 1.0 / d, dtype=complex)


def choi_robustness(ch: KrausChannel, backend="simplex") -> float:
    """R(Phi_E). Diagonal channels use R(E(|+><+|^n)), which is Clifford-equivalent."""
    if ch.is_diagonal:
        if ch.n > MAX_DIAGONAL_CHANNEL_QUBITS:
            raise SizeLimitError("diagonal channels limited to 5 qubits")
        return robustness_of_magic(ch(plus_state_density(ch.n)), backend, witness=False).value
    if 2 * ch.n > MAX_STATE_QUBITS - 1:
        raise SizeLimitError("general channels limited to 2 qubits")
    return robustness_of_magic(choi_of(ch).rho, backend, witness=False).value


def choi_robustness_full(ch: KrausChannel, backend="simplex") -> RobustnessResult:
    if 2 * ch.n > 4:
        raise SizeLimitError("full Choi robustness limited to 2-qubit channels")
    return robustness_of_magic(choi_of(ch).rho, backend)


# ---------------------------------------------------------------------------
# channel robustness


def build_tp_constraint(n: int) -> np.ndarray:
    """Selector M picking <1_A (x) P_B> for non-identity P_B from a 2n-qubit Pauli vector."""
    rows = np.arange(1, 4 ** n)
    m = np.zeros((rows.size, 16 ** n))
    m[np.arange(rows.size), rows] = 1.0
    return m


@dataclass
class ChannelDecomposition:
    """E = (1+p) Lambda_+ - p Lambda_- with pure-stabiliser Choi terms.

    diagonal=True means the terms are n-qubit states sigma with Choi state
    U_C (sigma (x) |0><0|) U_C^dag (U_C = CNOTs from output to reference).
    """

    n: int
    value: float
    p: float
    diagonal: bool
    plus_refs: np.ndarray
    plus_weights: np.ndarray
    minus_refs: np.ndarray
    minus_weights: np.ndarray
    iterations: int = 0

    def catalog(self):
        return enumerate_states(self.n if self.diagonal else 2 * self.n)

    def choi_tableau(self, ref: int) -> StabilizerTableau:
        cat = self.catalog()
        t = cat.tableau(int(ref))
        if not self.diagonal:
            return t
        n = self.n
        big = tensor(t, StabilizerTableau.zero_state(n))
        for i in range(n):
            big.apply_("CNOT", i, n + i)
        return big

    def choi_pauli_vector(self) -> np.ndarray:
        """Pauli vector of (1+p)Lambda_+ - p Lambda_- on the Choi level."""
        v = np.zeros(16 ** self.n)
        for refs, ws, sgn in ((self.plus_refs, self.plus_weights, 1), (self.minus_refs, self.minus_weights, -1)):
            for j, w in zip(refs, ws):
                v += sgn * w * tableau_pauli_vector(self.choi_tableau(j))
        return v


def channel_robustness(ch: KrausChannel, backend="simplex", force_general=False,
                       symmetric=None) -> ChannelDecomposition:
    n = ch.n
    if ch.is_diagonal and not force_general:
        if n > MAX_DIAGONAL_CHANNEL_QUBITS:
            raise SizeLimitError("diagonal channels limited to 5 qubits")
        cat = enumerate_states(n)
        target = pauli_vector(ch(plus_state_density(n)))
        extra = z_type_indices(n)[1:]
        diagonal = True
    else:
        if n > MAX_GENERAL_CHANNEL_QUBITS:
            raise SizeLimitError("general channels limited to 2 qubits")
        cat = enumerate_states(2 * n)
        target = choi_of(ch).pauli_vector
        extra = np.arange(1, 4 ** n)
        diagonal = False
    res = _catalog_lp(cat, target, extra, backend=backend, symmetric=symmetric)
    _check_lp(res)
    (pr, xp), (mr, xm) = res.plus, res.minus
    value = _snap(res.objective)
    if value == 1.0:
        # stabiliser-preserving: drop the numerically zero negative part
        plus_w = xp / xp.sum()
        mr, minus_w = mr[:0], xm[:0]
    else:
        plus_w, minus_w = xp, xm
    p = (value - 1) / 2
    return ChannelDecomposition(n, value, p, diagonal, pr, plus_w, mr, minus_w, res.iterations)


def channel_robustness_value(ch, backend="simplex") -> float:
    return channel_robustness(ch, backend).value


# ---------------------------------------------------------------------------
# capacity


def _output_robustness_general(args):
    ch, idx, backend = args
    cat = enumerate_states(2 * ch.n)
    v = tableau_to_dense(cat.tableau(idx))
    rho = np.outer(v, v.conj())
    out = chmod.apply_dense(ch, rho, list(range(ch.n)), 2 * ch.n)
    return robustness_of_magic(out, backend, witness=False).value


def _output_robustness_diag(args):
    ch, t, backend = args
    v = tableau_to_dense(t)
    return robustness_of_magic(ch(np.outer(v, v.conj())), backend, witness=False).value


@dataclass
class CapacityResult:
    value: float
    argmax: StabilizerTableau
    argmax_index: int
    values: list = field(default_factory=list)


def _pmap(fn, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
    return [fn(it) for it in items]


def _argmax(values):
    best = 0
    for i, v in enumerate(values):
        if v > values[best] + 1e-9:
            best = i
    return best


def magic_capacity(ch: KrausChannel, backend="simplex", jobs=1, exhaustive=False) -> CapacityResult:
    """C(E) = max over pure stabiliser inputs of R((E (x) 1)|phi><phi|).

    For general channels the output robustness depends only on the input's
    reduced state on the channel qubits (two purifications differ by a
    Clifford on the reference), so one representative per reduced state is
    evaluated unless exhaustive=True.
    """
    n = ch.n
    if ch.is_diagonal:
        if n > MAX_DIAGONAL_CHANNEL_QUBITS:
            raise SizeLimitError("diagonal channels limited to 5 qubits")
        inputs = capacity_input_set(ch)
        vals = _pmap(_output_robustness_diag, [(ch, t, backend) for t in inputs], jobs)
        k = _argmax(vals)
        return CapacityResult(vals[k], inputs[k], k, vals)
    if n > MAX_GENERAL_CHANNEL_QUBITS:
        raise SizeLimitError("general channels limited to 2 qubits")
    cat = enumerate_states(2 * n)
    if exhaustive:
        reps = list(range(len(cat)))
    else:
        reps = sorted(r for r, _ in reduced_state_classes(n))
    vals = _pmap(_output_robustness_general, [(ch, i, backend) for i in reps], jobs)
    k = _argmax(vals)
    return CapacityResult(vals[k], cat.tableau(reps[k]), reps[k], vals)


def capacity_value(ch, backend="simplex", jobs=1) -> float:
    return magic_capacity(ch, backend, jobs).value


# ---------------------------------------------------------------------------
# completely stabiliser preserving test


@dataclass
class SPOCertificate:
    preserving: bool
    decomposition: QuasiDecomposition | None = None
    witness: Witness | None = None


def is_completely_stabiliser_preserving(ch: KrausChannel, backend="simplex") -> SPOCertificate:
    """True iff Phi_E is a convex mixture of stabiliser states (TP rows included).

    Feasibility LP over positive columns only; when infeasible the certificate
    is the dual witness of the Choi robustness LP.
    """
    n = ch.n
    if ch.is_diagonal:
        if n > MAX_DIAGONAL_CHANNEL_QUBITS:
            raise SizeLimitError("diagonal channels limited to 5 qubits")
        nq, target, extra = n, pauli_vector(ch(plus_state_density(n))), z_type_indices(n)[1:]
        rho = ch(plus_state_density(n))
    else:
        if n > MAX_GENERAL_CHANNEL_QUBITS:
            raise SizeLimitError("general channels limited to 2 qubits")
        choi = choi_of(ch)
        nq, target, extra, rho = 2 * n, choi.pauli_vector, np.arange(1, 4 ** n), choi.rho
    cat = enumerate_states(nq)
    res = _catalog_lp(cat, target, extra, positive_only=True, backend=backend)
    if res.status == "optimal":
        sup, w = res.plus
        return SPOCertificate(True, QuasiDecomposition(f"stab{nq}", sup, w))
    if res.status != "infeasible":
        raise SolverError(f"LP failed: {res.status}")
    rob = robustness_of_magic(rho, backend)
    return SPOCertificate(False, rob.decomposition, rob.witness)


# ---------------------------------------------------------------------------
# CPR baseline


@lru_cache(maxsize=None)
def clifford_unitaries(n: int) -> tuple:
    """All n-qubit Clifford unitaries modulo global phase (24 for n=1, 11520 for n=2)."""
    h = chmod._H
    s = np.diag([1, 1j])
    gens = []
    for q in range(n):
        for g in (h, s):
            gens.append(_embed(g, q, n))
    if n == 2:
        gens.append(np.eye(4)[[0, 1, 3, 2]].astype(complex))

    def key(u):
        flat = u.ravel()
        k = np.flatnonzero(np.abs(flat) > 1e-9)[0]
        v = flat * (abs(flat[k]) / flat[k])
        # integer grid avoids -0.0 and rounding-boundary duplicates
        return (np.rint(v.real * 1e6).astype(np.int64).tobytes()
                + np.rint(v.imag * 1e6).astype(np.int64).tobytes())

    start = np.eye(2 ** n, dtype=complex)
    seen = {key(start): start}
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for g in gens:
                w = g @ u
                kw = key(w)
                if kw not in seen:
                    seen[kw] = w
                    nxt.append(w)
        frontier = nxt
    return tuple(seen.values())


def _embed(g, q, n):
    out = np.array([[1.0 + 0j]])
    for i in range(n):
        out = np.kron(out, g if i == q else np.eye(2))
    return out


@lru_cache(maxsize=None)
def cpr_basis(n: int = 1):
    """(list of channels, Choi Pauli-vector matrix) for the CPR set.

    n=1: 24 Clifford unitaries and 6 Pauli reset channels.
    n=2 (experimental): 11520 Cliffords plus resets on either qubit combined
    with a 1-qubit Clifford or reset on the other.
    """
    chans = [chmod.unitary_channel(u, "clifford") for u in clifford_unitaries(n)]
    resets = [chmod.pauli_reset(t) for t in ("+Z", "-Z", "+X", "-X", "+Y", "-Y")]
    if n == 1:
        chans += resets
    elif n == 2:
        c1 = [chmod.unitary_channel(u) for u in clifford_unitaries(1)]
        for r in resets:
            for c in c1:
                chans.append(chmod.tensor(r, c))
                chans.append(chmod.tensor(c, r))
            for r2 in resets:
                chans.append(chmod.tensor(r, r2))
    else:
        raise SizeLimitError("CPR basis available for n <= 2")
    mat = np.array([choi_of(c).pauli_vector for c in chans]).T
    return chans, mat


def r_cpr(ch: KrausChannel, n: int | None = None, backend="simplex") -> float:
    n = ch.n if n is None else n
    if n != ch.n:
        raise ValueError("n must match the channel")
    _, mat = cpr_basis(n)
    src = DenseSource(np.concatenate([mat, -mat], axis=1))
    try:
        res = solve_lp(src, choi_of(ch).pauli_vector, backend=backend)
    except LPError as e:
        raise SolverError(str(e)) from e
    if res.status == "infeasible":
        return float("inf")
    _check_lp(res)
    return _snap(res.objective)


# ---------------------------------------------------------------------------


def monotone_report(ch: KrausChannel, measures=("rphi", "cap", "rstar"), backend="simplex", jobs=1) -> dict:
    out = {}
    for m in measures:
        if m == "rphi":
            out["R_phi"] = choi_robustness(ch, backend)
        elif m == "cap":
            out["C"] = capacity_value(ch, backend, jobs)
        elif m == "rstar":
            out["R_star"] = channel_robustness_value(ch, backend)
        elif m == "rcpr":
            out["R_cpr"] = r_cpr(ch, backend=backend)
        else:
            raise ValueError(f"unknown measure {m!r}")
    return out


def export_decomposition(res: RobustnessResult, measure: str = "R_phi") -> dict:
    """JSON-ready record of a robustness LP solution."""
    wit = None
    if res.witness is not None:
        wit = [[[float(v.real), float(v.imag)] for v in row] for row in res.witness.W]
    dec = res.decomposition
    return {
        "measure": measure,
        "value": res.value,
        "p": (res.value - 1) / 2,
        "terms": [{"state_index": int(j), "coefficient": float(q)}
                  for j, q in zip(dec.basis_refs, dec.coefficients)],
        "witness": wit,
        "solver": {"iterations": res.iterations, "duality_gap": res.duality_gap},
    }
