"""Quasiprobability Monte Carlo simulators for stabiliser circuits with magic channels.

static_simulate   samples from precomputed channel decompositions (cost ~ prod R*^2)
dynamic_simulate  decomposes each output state on the fly (cost <= prod C^2)
exact_expectation dense density-matrix oracle
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import channels as chmod
from . import gf2
from .channels import KrausChannel
from .monotones import SizeLimitError, channel_robustness, r_cpr, robustness_of_magic
from .pauli_tableau import (
    PauliString,
    StabilizerTableau,
    apply_choi_branch_,
    concentrate_entanglement,
    drop_qubits,
    invert_circuit,
    permute_qubits,
    subgroup_on,
    tableau_to_dense,
    tensor,
)
from .stab_catalog import enumerate_states, tableau_pauli_vector

DENSE_LIMIT = 12
BRANCH_TOL = 1e-9
BRANCH_FAIL = 1e-6


class SimulationError(RuntimeError):
    pass


def required_samples(l1_total: float, delta: float, epsilon: float) -> int:
    """Hoeffding sample count for additive error delta with failure probability epsilon."""
    if l1_total < 1 or delta <= 0 or not 0 < epsilon < 1:
        raise ValueError("need l1_total >= 1, delta > 0, 0 < epsilon < 1")
    return math.ceil(2 * l1_total ** 2 * math.log(2 / epsilon) / delta ** 2)


# ---------------------------------------------------------------------------
# circuits


@dataclass
class CircuitSpec:
    total_n: int
    elements: list  # [(KrausChannel, tuple of qubits)]
    observable: PauliString

    def __post_init__(self):
        if self.observable.n != self.total_n:
            raise ValueError("observable must act on total_n qubits")
        for i, (ch, qs) in enumerate(self.elements):
            qs = tuple(int(q) for q in qs)
            if len(qs) != ch.n or len(set(qs)) != len(qs):
                raise ValueError(f"element {i}: support does not match channel size")
            if any(q < 0 or q >= self.total_n for q in qs):
                raise ValueError(f"element {i}: qubit out of range")
            limit = 5 if ch.is_diagonal else 2
            if len(qs) > limit:
                raise SizeLimitError(f"element {i}: support {len(qs)} exceeds {limit}")
            self.elements[i] = (ch, qs)

    @classmethod
    def from_json(cls, obj) -> "CircuitSpec":
        try:
            n = int(obj["n"])
            els = [(chmod.channel_from_json(e["channel"]), tuple(e["qubits"])) for e in obj["elements"]]
            obs = PauliString.from_str(obj.get("observable", "Z" + "I" * (n - 1)))
        except (KeyError, TypeError) as e:
            raise chmod.ChannelParseError(f"bad circuit JSON: {e}") from e
        return cls(n, els, obs)

    @classmethod
    def load(cls, path) -> "CircuitSpec":
        with open(path) as f:
            return cls.from_json(json.load(f))

    def to_json(self) -> dict:
        return {
            "n": self.total_n,
            "elements": [{"channel": chmod.channel_to_json(ch), "qubits": list(qs)} for ch, qs in self.elements],
            "observable": str(self.observable).lstrip("+"),
        }


def block_diagonal_elements(circuit: CircuitSpec, max_qubits: int = 4) -> CircuitSpec:
    """Merge runs of consecutive 1-qubit diagonal elements into diagonal blocks.

    Gates in a run commute, so each run is composed per qubit and the
    qubits are tensored together in groups of at most ``max_qubits``.
    Other elements are kept in place.
    """
    if not 1 <= max_qubits <= 5:
        raise ValueError("max_qubits must be in 1..5")
    out, run = [], {}

    def flush():
        qs = sorted(run)
        for i in range(0, len(qs), max_qubits):
            group = qs[i:i + max_qubits]
            ch = run[group[0]]
            for q in group[1:]:
                ch = chmod.tensor(ch, run[q])
            out.append((ch, tuple(group)))
        run.clear()

    for ch, qs in circuit.elements:
        if ch.n == 1 and ch.is_diagonal:
            q = qs[0]
            run[q] = chmod.compose(ch, run[q]) if q in run else ch
        else:
            flush()
            out.append((ch, qs))
    flush()
    return CircuitSpec(circuit.total_n, out, circuit.observable)


def exact_expectation(circuit: CircuitSpec) -> float:
    n = circuit.total_n
    if n > DENSE_LIMIT:
        raise SizeLimitError(f"dense oracle limited to {DENSE_LIMIT} qubits")
    rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
    rho[0, 0] = 1.0
    for ch, qs in circuit.elements:
        rho = chmod.apply_dense(ch, rho, list(qs), n)
    return float(np.real(np.trace(circuit.observable.to_matrix() @ rho)))


def _place(parts, n):
    """Tensor (tableau, positions) pieces into one n-qubit tableau."""
    big = None
    pos = []
    for t, qs in parts:
        big = t if big is None else tensor(big, t)
        pos += list(qs)
    order = [0] * n
    for i, q in enumerate(pos):
        order[q] = i
    return permute_qubits(big, order)


def _restrict(t, qubits):
    """Pure product factor of t on ``qubits`` as its own tableau."""
    x, z, r = subgroup_on(t, qubits)
    if x.shape[0] != len(qubits):
        raise SimulationError("state is not a product across the requested cut")
    qs = list(qubits)
    return StabilizerTableau.from_stabilizers([(x[i, qs], z[i, qs], r[i]) for i in range(len(qs))])


# ---------------------------------------------------------------------------
# static


_DIGIT = np.array([[0, 3], [1, 2]])  # Pauli digit from (x, z): I0 X1 Y2 Z3


def support_expectations(state: StabilizerTableau, support):
    """Indices (base 4 over ``support``) and values of every Pauli on the support
    with non-zero expectation; these form the local stabiliser subgroup."""
    qs = list(support)
    m = len(qs)
    gx, gz, gr = subgroup_on(state, qs)
    x = np.zeros((1, m), dtype=np.int64)
    z = np.zeros((1, m), dtype=np.int64)
    r = np.zeros(1, dtype=np.int64)
    for i in range(gx.shape[0]):
        ax, az = gx[i, qs].astype(np.int64), gz[i, qs].astype(np.int64)
        nr = (r + int(gr[i]) + 2 * (z @ ax)) % 4
        x = np.concatenate([x, x ^ ax])
        z = np.concatenate([z, z ^ az])
        r = np.concatenate([r, nr])
    idx = (_DIGIT[x, z] * (4 ** np.arange(m - 1, -1, -1))).sum(axis=1)
    phase = (r - (x & z).sum(axis=1)) % 4
    return idx, np.where(phase == 0, 1.0, -1.0)


def transpose_signs(m: int) -> np.ndarray:
    """(-1)^(number of Y) for each m-qubit Pauli index: Q^T = s(Q) Q."""
    d = np.arange(4 ** m)
    ny = np.zeros(d.size, dtype=np.int64)
    for _ in range(m):
        ny += (d % 4) == 2
        d = d // 4
    return np.where(ny % 2, -1.0, 1.0)


def branch_trace_rows(tableaux, weights, m: int) -> np.ndarray:
    """Rows w_l <1 (x) Q>_l s(Q): the trace of branch l on rho is row_l . <Q>_rho."""
    s = transpose_signs(m)
    rows = np.zeros((len(tableaux), 4 ** m))
    for i, (t, w) in enumerate(zip(tableaux, weights)):
        rows[i] = w * tableau_pauli_vector(t)[: 4 ** m] * s
    return rows


@dataclass
class StaticElementDecomposition:
    p: float
    support: tuple
    # per part k (0 = positive, 1 = negative): branch weights normalised to sum 1
    weights: tuple
    tableaux: tuple
    trace_rows: tuple = ()

    def branch_probabilities(self, state, k: int) -> np.ndarray:
        idx, val = support_expectations(state, self.support)
        return self.trace_rows[k][:, idx] @ val

    @property
    def l1(self) -> float:
        return 1 + 2 * self.p


def precompute_static(circuit: CircuitSpec, backend="simplex") -> list:
    out = []
    for j, (ch, qs) in enumerate(circuit.elements):
        try:
            dec = channel_robustness(ch, backend)
        except Exception as e:
            raise SimulationError(f"element {j}: {e}") from e
        parts_w, parts_t = [], []
        for refs, ws in ((dec.plus_refs, dec.plus_weights), (dec.minus_refs, dec.minus_weights)):
            ws = np.asarray(ws, dtype=float)
            parts_w.append(ws / ws.sum() if ws.size else ws)
            parts_t.append(tuple(dec.choi_tableau(int(r)) for r in refs))
        rows = tuple(branch_trace_rows(t, w, len(qs)) for t, w in zip(parts_t, parts_w))
        out.append(StaticElementDecomposition(dec.p, qs, tuple(parts_w), tuple(parts_t), rows))
    return out


def static_l1(decomps) -> float:
    return float(np.prod([d.l1 for d in decomps])) if decomps else 1.0


def cpr_sample_factor(circuit: CircuitSpec, backend="simplex") -> float:
    """prod R_CPR^2: the sample-count factor of the Clifford+reset baseline."""
    cache = {}
    out = 1.0
    for ch, _ in circuit.elements:
        key = id(ch)
        if key not in cache:
            cache[key] = r_cpr(ch, backend=backend)
        out *= cache[key] ** 2
    return out


@dataclass
class SimulationResult:
    estimate: float
    stderr: float
    n_samples: int
    l1_total: float
    seed: int
    method: str
    max_abs_weight: float = 0.0
    max_branch_error: float = 0.0
    step_r_max: list = field(default_factory=list)
    runtime_ms: float = 0.0

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "l1_total": self.l1_total,
            "seed": self.seed,
            "method": self.method,
        }


def _static_sample(decomps, n, obs, rng, memo=None):
    """One trajectory. ``memo`` caches per-state branch data; it only saves
    work and never changes the random stream or the result."""
    memo = {} if memo is None else memo
    start = memo.get("start")
    if start is None:
        start = StabilizerTableau.zero_state(n)
        start = memo["start"] = (start, start.canonical_key())
    state, skey = start
    sign = 1
    worst = 0.0
    for j, d in enumerate(decomps):
        k = 1 if (d.p > 0 and rng.random() < d.p / d.l1) else 0
        if k:
            sign = -sign
        ent = memo.get((j, k, skey))
        if ent is None:
            probs = d.branch_probabilities(state, k)
            tot = probs.sum()
            if abs(tot - 1) > BRANCH_FAIL:
                raise SimulationError(f"element {j}: branch probabilities sum to {tot}")
            ent = (np.cumsum(probs / tot), abs(tot - 1), {})
            memo[(j, k, skey)] = ent
        cdf, err, after = ent
        worst = max(worst, err)
        l = min(int(np.searchsorted(cdf, rng.random(), side="right")), cdf.size - 1)
        nxt = after.get(l)
        if nxt is None:
            _, t = apply_choi_branch_(state, d.tableaux[k][l], d.support)
            if t is None:
                raise SimulationError(f"element {j}: sampled a zero-probability branch")
            nxt = after[l] = (t, t.canonical_key())
        state, skey = nxt
    val = memo.get(("obs", skey))
    if val is None:
        val = memo[("obs", skey)] = state.expectation(obs)
    return sign * val, worst


def _static_chunk(args):
    decomps, n, obs, seed, idx = args
    vals = np.empty(len(idx))
    worst = 0.0
    memo = {}
    for j, i in enumerate(idx):
        v, w = _static_sample(decomps, n, obs, np.random.default_rng([seed, int(i)]), memo)
        vals[j] = v
        worst = max(worst, w)
    return vals, worst


def _chunks(num, jobs):
    k = max(1, min(num, 4 * max(1, jobs)))
    return np.array_split(np.arange(num), k)


def _run(fn, payload, num, jobs):
    chunks = _chunks(num, jobs)
    args = [payload + (c,) for c in chunks]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            res = list(ex.map(fn, args))
    else:
        res = [fn(a) for a in args]
    return res


def _summary(vals):
    if vals.size == 0:
        return 0.0, 0.0
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
    return est, se


def static_simulate(circuit: CircuitSpec, decomps, num_samples: int, rng_seed: int = 0, jobs: int = 1) -> SimulationResult:
    l1 = static_l1(decomps)
    res = _run(_static_chunk, (decomps, circuit.total_n, circuit.observable, rng_seed), num_samples, jobs)
    signs = np.concatenate([r[0] for r in res])
    vals = l1 * signs
    est, se = _summary(vals)
    worst = max((r[1] for r in res), default=0.0)
    return SimulationResult(est, se, num_samples, l1, rng_seed, "static",
                            float(np.abs(vals).max(initial=0.0)), worst,
                            [d.l1 for d in decomps])


# ---------------------------------------------------------------------------
# dynamic


@dataclass
class _LocalDecomp:
    norm: float
    probs: np.ndarray
    signs: np.ndarray
    states: tuple  # tableaux on the LP qubits


def _decompose_dense(rho, backend):
    res = robustness_of_magic(rho, backend, witness=False)
    q = res.decomposition.coefficients
    nq = int(round(np.log2(rho.shape[0])))
    cat = enumerate_states(nq)
    states = tuple(cat.tableau(int(j)) for j in res.decomposition.basis_refs)
    a = np.abs(q)
    return _LocalDecomp(float(a.sum()), a / a.sum(), np.sign(q), states)


def _controlled_pauli(ctrl, x, z, qubits):
    """Gates for controlled-P (P given by x/z bits on ``qubits``), ignoring P's sign."""
    gates = []
    for q, xb, zb in zip(qubits, x, z):
        if xb and zb:
            gates += [("SDG", (q,)), ("CNOT", (ctrl, q)), ("S", (q,))]
        elif xb:
            gates.append(("CNOT", (ctrl, q)))
        elif zb:
            gates.append(("CZ", (ctrl, q)))
    return gates


def diagonal_disentangler(t: StabilizerTableau, a_qubits):
    """Gates commuting with any diagonal map on A that make t a product A | rest.

    Stabilisers whose X-part on A is e map the rest-state of branch x to that
    of x+e by their rest-part Q; controlled-Q from a pivot qubit of e undoes
    this dependence. Returns (gates, tableau_after).
    """
    n = t.n
    a = list(a_qubits)
    rest = [q for q in range(n) if q not in a]
    sx, sz = t.x[n:].copy(), t.z[n:].copy()
    xa = sx[:, a]
    _, piv = gf2.rref(xa)
    # reduce rows so each pivot column of the A X-part has a single owner
    rows = []
    used = set()
    sx, sz = sx.astype(np.uint8), sz.astype(np.uint8)
    for c in piv:
        col = a[c]
        cand = [i for i in range(n) if i not in used and sx[i, col]]
        i0 = cand[0]
        used.add(i0)
        for i in range(n):
            if i != i0 and sx[i, col]:
                sx[i] ^= sx[i0]
                sz[i] ^= sz[i0]
        rows.append((col, i0))
    gates = []
    w = t.copy()
    for col, i0 in rows:
        g = _controlled_pauli(col, sx[i0, rest], sz[i0, rest], rest)
        gates += g
    w.apply_circuit_(gates)
    return gates, w


def dynamic_simulate(circuit: CircuitSpec, num_samples: int, rng_seed: int = 0, lp_cache=None,
                     jobs: int = 1, backend="simplex") -> SimulationResult:
    payload = (circuit, rng_seed, backend)
    res = _run(_dynamic_chunk, payload, num_samples, jobs)
    vals = np.concatenate([r[0] for r in res])
    steps = np.max(np.stack([r[1] for r in res]), axis=0) if res else np.zeros(0)
    if lp_cache is not None:
        for r in res:
            lp_cache.update(r[2])
    est, se = _summary(vals)
    bound = float(np.prod(steps)) if steps.size else 1.0
    return SimulationResult(est, se, num_samples, bound, rng_seed, "dynamic",
                            float(np.abs(vals).max(initial=0.0)), 0.0, [float(s) for s in steps])


def _dynamic_chunk(args):
    circuit, seed, backend, idx = args
    memo = {}
    steps = np.ones(len(circuit.elements))
    vals = np.empty(len(idx))
    for j, i in enumerate(idx):
        vals[j] = _dynamic_sample(circuit, np.random.default_rng([seed, int(i)]), memo, steps, backend)
    return vals, steps, {k: v for k, v in memo.items() if k[0] != "state"}


def _dynamic_step(state, ch, support, j, memo, backend):
    """Returns (local decomposition, rebuild function)."""
    n = state.n
    a = list(support)
    m = len(a)
    if ch.is_diagonal:
        gates, w = diagonal_disentangler(state, a)
        rest = [q for q in range(n) if q not in a]
        ta = _restrict(w, a)
        key = (j, "d", ta.canonical_key())
        if key not in memo:
            v = tableau_to_dense(ta)
            memo[key] = _decompose_dense(ch(np.outer(v, v.conj())), backend)
        tr = _restrict(w, rest) if rest else None
        inv = invert_circuit(gates)

        def rebuild(s):
            parts = [(s, a)] + ([(tr, rest)] if rest else [])
            out = _place(parts, n)
            return out.apply_circuit_(inv)

        return memo[key], rebuild
    gates, bq, cq, w = concentrate_entanglement(state, a, m)
    ab = a + list(bq)
    order = ab + list(cq)
    local = drop_qubits(permute_qubits(w, order), list(range(len(ab), n)))
    key = (j, "g", local.canonical_key())
    if key not in memo:
        v = tableau_to_dense(local)
        rho = chmod.apply_dense(ch, np.outer(v, v.conj()), list(range(m)), len(ab))
        memo[key] = _decompose_dense(rho, backend)
    inv = invert_circuit(gates)

    def rebuild(s):
        parts = [(s, ab)] + ([(StabilizerTableau.zero_state(len(cq)), cq)] if cq else [])
        out = _place(parts, n)
        return out.apply_circuit_(inv)

    return memo[key], rebuild


def _dynamic_sample(circuit, rng, memo, steps, backend):
    state = StabilizerTableau.zero_state(circuit.total_n)
    weight = 1.0
    for j, (ch, qs) in enumerate(circuit.elements):
        skey = ("state", j, state.canonical_key())
        ent = memo.get(skey)
        if ent is None:
            dec, rebuild = _dynamic_step(state, ch, qs, j, memo, backend)
            ent = (dec, np.cumsum(dec.probs), rebuild, {})
            memo[skey] = ent
        dec, cdf, rebuild, after = ent
        steps[j] = max(steps[j], dec.norm)
        s = min(int(np.searchsorted(cdf, rng.random(), side="right")), len(dec.states) - 1)
        weight *= dec.norm * dec.signs[s]
        nxt = after.get(s)
        if nxt is None:
            nxt = after[s] = rebuild(dec.states[s])
        state = nxt
    return weight * state.expectation(circuit.observable)


def exact_probability_sum(state: StabilizerTableau, decomp: StaticElementDecomposition, k: int) -> float:
    """Sum of static branch probabilities for part k on ``state`` (1 for a TP part)."""
    m = len(decomp.support)
    tot = Fraction(0)
    for w, t in zip(decomp.weights[k], decomp.tableaux[k]):
        raw, _ = apply_choi_branch_(state, t, decomp.support)
        tot += Fraction(w) * raw * 4 ** m
    return float(tot)
