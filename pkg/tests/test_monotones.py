import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chanmagic import channels as C
from chanmagic import monotones as M
from chanmagic.pauli_basis import pauli_vector
from chanmagic.pauli_tableau import entanglement_rank, tableau_to_dense
from chanmagic.stab_catalog import enumerate_states

EPS = 1e-6
SQRT2 = np.sqrt(2)
T_KET = np.array([1, np.exp(1j * np.pi / 4)]) / np.sqrt(2)
T_RHO = np.outer(T_KET, T_KET.conj())

# frozen values from the simplex backend, cross-checked against HiGHS
R_TT = 1.747546895706428
R_TTT = 2.218951416497459
RSTAR_M24 = 2.390165042944957


def kron_all(ms):
    out = np.array([[1.0 + 0j]])
    for m in ms:
        out = np.kron(out, m)
    return out


def random_clifford_channel(rng, n=1):
    us = M.clifford_unitaries(n)
    return C.unitary_channel(us[int(rng.integers(len(us)))])


def rphi(ch):
    return M.choi_robustness(ch)


def cap(ch):
    return M.capacity_value(ch)


def rstar(ch):
    return M.channel_robustness_value(ch)


# ---- state robustness -----------------------------------------------------

def test_stabiliser_state_is_one():
    assert M.robustness_of_magic(np.diag([1, 0])).value == 1.0
    assert M.robustness_of_magic(np.eye(4) / 4).value == 1.0


def test_t_state():
    res = M.robustness_of_magic(T_RHO)
    assert res.value == pytest.approx(SQRT2, abs=1e-9)
    assert abs(res.duality_gap) <= 1e-7


@pytest.mark.parametrize("k,want", [(2, R_TT), (3, R_TTT)])
def test_t_tensor_powers_frozen(k, want):
    rho = kron_all([T_RHO] * k)
    assert M.robustness_of_magic(rho).value == pytest.approx(want, abs=1e-9)
    assert 1 < want < 2 ** (k / 2) + 1e-9


def test_backends_agree():
    rho = kron_all([T_RHO, T_RHO])
    a = M.robustness_of_magic(rho, backend="simplex").value
    b = M.robustness_of_magic(rho, backend="highs").value
    assert a == pytest.approx(b, abs=1e-7)


def random_density(rng, n):
    d = 2 ** n
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = a @ a.conj().T
    return r / np.trace(r)


@given(st.integers(1, 2), st.integers(0, 2 ** 31))
@settings(max_examples=15)
def test_decomposition_and_witness(n, seed):
    rho = random_density(np.random.default_rng(seed), n)
    res = M.robustness_of_magic(rho)
    cat = enumerate_states(n)
    dec = res.decomposition
    assert np.sum(dec.coefficients) == pytest.approx(1.0, abs=1e-7)
    assert dec.l1_norm == pytest.approx(res.value, abs=1e-7) or res.value == 1.0
    assert np.max(np.abs(dec.reconstruct(cat) - pauli_vector(rho))) <= 1e-7
    # witness: non-positive on every stabiliser state, positive on rho unless stabiliser
    tr = cat.rmatvec(res.witness.y) - 1
    assert tr.max() <= 1e-7
    assert res.witness.value(rho) == pytest.approx(res.value - 1, abs=1e-7)
    assert abs(res.duality_gap) <= 1e-7


def test_export_decomposition():
    out = M.export_decomposition(M.robustness_of_magic(T_RHO))
    assert out["measure"] == "R_phi"
    assert out["p"] == pytest.approx((SQRT2 - 1) / 2)
    assert sum(t["coefficient"] for t in out["terms"]) == pytest.approx(1.0)
    assert len(out["witness"]) == 2 and len(out["witness"][0][0]) == 2
    assert set(out["solver"]) == {"iterations", "duality_gap"}


# ---- Choi robustness --------------------------------------------------------

def test_choi_examples():
    e1, e2 = C.z_reset_channel(), C.t_prepare_conditional()
    assert rphi(C.identity()) == 1.0
    assert rphi(e1) == 1.0
    assert rphi(e2) == pytest.approx(1.2071067811865, abs=1e-7)
    assert rphi(C.compose(e2, e1)) == pytest.approx(SQRT2, abs=1e-7)


def test_tp_constraint():
    m = M.build_tp_constraint(1)
    assert m.shape == (3, 16)
    assert [int(np.flatnonzero(r)[0]) for r in m] == [1, 2, 3]
    assert np.allclose(m @ C.choi_of(C.identity()).pauli_vector, 0)
    proj = C.KrausChannel((np.diag([1.0, 0.0]),), check_tp=False)
    assert np.any(np.abs(m @ C.choi_of(proj).pauli_vector) > 0.1)


@pytest.mark.parametrize("build", [C.t_gate, lambda: C.z_rotation(0.3),
                                   lambda: C.random_diagonal_unitary(1, np.random.default_rng(4)),
                                   lambda: C.mixture([C.t_gate(), C.identity()], [0.6, 0.4])])
def test_diagonal_path_consistency_one_qubit(build):
    ch = build()
    assert ch.is_diagonal
    assert rphi(ch) == pytest.approx(M.choi_robustness_full(ch).value, abs=1e-6)
    assert M.channel_robustness(ch).value == pytest.approx(
        M.channel_robustness(ch, force_general=True).value, abs=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("build", [C.cs, lambda: C.random_diagonal_unitary(2, np.random.default_rng(9))])
def test_diagonal_path_consistency_two_qubit(build):
    ch = build()
    assert rphi(ch) == pytest.approx(M.choi_robustness_full(ch).value, abs=1e-6)
    assert M.channel_robustness(ch).value == pytest.approx(
        M.channel_robustness(ch, force_general=True).value, abs=1e-6)


# ---- channel robustness ----------------------------------------------------

def test_channel_robustness_examples():
    assert rstar(C.hadamard_conditional()) == 1.0
    assert rstar(C.t_gate()) == pytest.approx(SQRT2, abs=1e-7)


@pytest.mark.parametrize("build", [C.t_gate, C.measure_t_basis, lambda: C.amplitude_damping(0.3),
                                   lambda: C.random_channel(1, np.random.default_rng(8))])
def test_channel_decomposition_reconstructs(build):
    ch = build()
    dec = M.channel_robustness(ch)
    assert dec.value == pytest.approx(1 + 2 * dec.p)
    v = dec.choi_pauli_vector()
    assert np.max(np.abs(v - C.choi_of(ch).pauli_vector)) <= 1e-7
    # each part is trace preserving: flat reference marginal
    for refs, ws in ((dec.plus_refs, dec.plus_weights), (dec.minus_refs, dec.minus_weights)):
        if len(refs):
            part = sum(w * pauli_vector_of(dec, j) for j, w in zip(refs, ws)) / np.sum(ws)
            assert np.max(np.abs(part[1:4])) <= 1e-7


def pauli_vector_of(dec, j):
    v = tableau_to_dense(dec.choi_tableau(j))
    return pauli_vector(np.outer(v, v.conj()))


def test_diagonal_decomposition_terms_are_tp():
    dec = M.channel_robustness(C.ccz())
    assert dec.diagonal
    v = dec.choi_pauli_vector()
    assert np.max(np.abs(v - C.choi_of(C.ccz()).pauli_vector)) <= 1e-7


def test_size_limits():
    with pytest.raises(M.SizeLimitError):
        M.channel_robustness(C.random_channel(3, np.random.default_rng(0)))
    with pytest.raises(M.SizeLimitError):
        M.choi_robustness(C.random_channel(3, np.random.default_rng(0)))


# ---- capacity ---------------------------------------------------------------

def test_capacity_clifford_is_one():
    assert cap(C.hadamard()) == 1.0
    assert cap(C.cz()) == 1.0


def test_capacity_measure_t():
    res = M.magic_capacity(C.measure_t_basis())
    assert res.value == pytest.approx(SQRT2, abs=1e-7)
    assert entanglement_rank(res.argmax, [0]) == 1
    ex = M.magic_capacity(C.measure_t_basis(), exhaustive=True)
    assert ex.value == pytest.approx(res.value, abs=1e-9)
    best_product = max(
        M.robustness_of_magic(C.measure_t_basis()(np.outer(v, v.conj()))).value
        for v in (tableau_to_dense(t) for t in enumerate_states(1).states))
    assert best_product == pytest.approx(1.0, abs=1e-7)


def test_capacity_parallel_matches_serial():
    ch = C.random_channel(1, np.random.default_rng(21))
    a = M.magic_capacity(ch, jobs=1)
    b = M.magic_capacity(ch, jobs=2)
    assert a.value == b.value and a.argmax_index == b.argmax_index


def test_multicontrol_subspace_values():
    res = M.magic_capacity(C.multicontrol_phase(2, 3))
    assert np.allclose(res.values, [1.414, 1.849, 2.195], atol=1e-3)


# ---- stabiliser preserving ---------------------------------------------------

def test_spo():
    cert = M.is_completely_stabiliser_preserving(C.hadamard_conditional())
    assert cert.preserving and cert.decomposition.coefficients.min() >= 0
    assert np.sum(cert.decomposition.coefficients) == pytest.approx(1.0)
    # E_T is checked on its Choi state, the diagonal T gate on E(|+>)
    for ch, rho in ((C.measure_t_basis(), C.choi_of(C.measure_t_basis()).rho),
                    (C.t_gate(), T_RHO)):
        cert = M.is_completely_stabiliser_preserving(ch)
        assert not cert.preserving
        assert cert.witness.value(rho) > 1e-3
        nq = int(np.log2(rho.shape[0]))
        assert (enumerate_states(nq).rmatvec(cert.witness.y) - 1).max() <= 1e-7
    assert M.is_completely_stabiliser_preserving(C.cz()).preserving


# ---- CPR ------------------------------------------------------------------------

def test_cpr_basis():
    assert len(M.clifford_unitaries(1)) == 24
    assert len(M.clifford_unitaries(2)) == 11520
    chans, mat = M.cpr_basis(1)
    assert len(chans) == 30 and mat.shape == (16, 30)


def test_r_cpr_examples():
    rng = np.random.default_rng(2)
    for _ in range(5):
        assert M.r_cpr(random_clifford_channel(rng)) == 1.0
    assert M.r_cpr(C.hadamard_conditional()) == pytest.approx(2.0, abs=1e-6)
    assert M.r_cpr(C.pauli_reset("-X")) == 1.0


@given(st.integers(0, 2 ** 31))
@settings(max_examples=15)
def test_r_cpr_dominates_channel_robustness(seed):
    ch = C.random_channel(1, np.random.default_rng(seed))
    assert M.r_cpr(ch) >= rstar(ch) - 1e-7


# ---- invariants -------------------------------------------------------------------

@given(st.integers(0, 2 ** 31))
@settings(max_examples=25)
def test_sandwich(seed):
    ch = C.random_channel(1, np.random.default_rng(seed))
    a, b, c = rphi(ch), cap(ch), rstar(ch)
    assert a - EPS <= b <= c + EPS


@given(st.integers(0, 2 ** 31))
@settings(max_examples=15)
def test_clifford_monotonicity(seed):
    rng = np.random.default_rng(seed)
    ch = C.random_channel(1, rng)
    cl = random_clifford_channel(rng)
    r = rstar(ch)
    assert rstar(C.compose(cl, ch)) <= r + EPS
    assert rstar(C.compose(ch, cl)) <= r + EPS
    assert cap(C.compose(cl, ch)) <= cap(ch) + EPS


@given(st.integers(0, 2 ** 31))
@settings(max_examples=15)
def test_submultiplicativity(seed):
    rng = np.random.default_rng(seed)
    a, b = C.random_channel(1, rng), C.random_channel(1, rng)
    ab = C.compose(b, a)
    assert rstar(ab) <= rstar(a) * rstar(b) + EPS
    assert cap(ab) <= cap(a) * cap(b) + EPS


@given(st.integers(0, 2 ** 31), st.floats(0, 1))
@settings(max_examples=15)
def test_convexity(seed, w):
    rng = np.random.default_rng(seed)
    a, b = C.random_channel(1, rng), C.random_channel(1, rng)
    mix = C.mixture([a, b], [w, 1 - w])
    for f in (rphi, cap, rstar):
        assert f(mix) <= w * f(a) + (1 - w) * f(b) + EPS


def test_submultiplicativity_fails_for_choi_robustness():
    e1, e2 = C.z_reset_channel(), C.t_prepare_conditional()
    assert rphi(C.compose(e2, e1)) > rphi(e1) * rphi(e2) + 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("build", [C.t_gate, C.measure_t_basis])
def test_identity_invariance(build):
    ch = build()
    big = C.tensor(ch, C.identity())
    assert rstar(big) == pytest.approx(rstar(ch), abs=EPS)


def test_faithfulness():
    rng = np.random.default_rng(17)
    resets = [C.pauli_reset(t) for t in ("+Z", "-Z", "+X", "-X", "+Y", "-Y")]
    for _ in range(6):
        ch = random_clifford_channel(rng)
        for _ in range(2):
            nxt = resets[int(rng.integers(6))] if rng.random() < 0.3 else random_clifford_channel(rng)
            ch = C.compose(nxt, ch)
        assert (rphi(ch), cap(ch), rstar(ch)) == (1.0, 1.0, 1.0)


@pytest.mark.parametrize("build,value", [(C.t_gate, SQRT2), (C.cz, 1.0), (C.cs, 2.2)])
def test_third_level_equality(build, value):
    ch = build()
    for f in (rphi, cap, rstar):
        assert f(ch) == pytest.approx(value, abs=1e-5)


# ---- frozen regression baselines --------------------------------------------------

def test_ampdamp_baselines():
    u, lam = C.x_rotation(np.pi / 8), C.amplitude_damping(0.1)
    ul, lu = C.compose(u, lam), C.compose(lam, u)
    assert rstar(ul) == pytest.approx(1.4142135623730943, abs=1e-7)
    assert rstar(lu) == pytest.approx(1.4416407864998737, abs=1e-7)
    assert M.r_cpr(lu) == pytest.approx(1.4416407864998741, abs=1e-7)
    assert M.r_cpr(ul) == pytest.approx(1.483062142737183, abs=1e-7)
    assert cap(ul) == pytest.approx(1.414213562373095, abs=1e-7)
    assert cap(lu) == pytest.approx(1.4416407864998737, abs=1e-7)


def test_rotation_tensor_baselines():
    u = C.z_rotation(np.pi / 8)
    assert rstar(u) == pytest.approx(1.414213562373095, abs=1e-7)
    assert rstar(C.tensor(u, u)) == pytest.approx(1.7475468957064288, abs=1e-7)


def test_multicontrol_second_representative():
    # uniform superposition over the even-parity subspace of F_2^3 (dimension 2)
    v = np.zeros(8, dtype=complex)
    for x in range(8):
        if bin(x).count("1") % 2 == 0:
            v[x] = 0.5
    out = C.multicontrol_phase(2, 3)(np.outer(v, v.conj()))
    assert M.robustness_of_magic(out).value == pytest.approx(1.849, abs=1e-3)
