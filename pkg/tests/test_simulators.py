import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chanmagic import channels as C
from chanmagic import monotones as M
from chanmagic import simulators as S
from chanmagic.pauli_tableau import PauliString, StabilizerTableau, entanglement_rank, tableau_to_dense
from conftest import random_clifford_gates


def circuit(n, elements, obs):
    return S.CircuitSpec(n, list(elements), PauliString.from_str(obs))


def h_t_ad():
    return circuit(1, [(C.hadamard(), (0,)), (C.t_gate(), (0,)), (C.amplitude_damping(0.2), (0,))], "X")


def gap_channel():
    # third random channel of seed 0: capacity strictly below channel robustness
    rng = np.random.default_rng(0)
    for _ in range(2):
        C.random_channel(1, rng)
    return C.random_channel(1, rng)


def test_required_samples():
    assert S.required_samples(1, 0.1, 0.05) == 738
    assert S.required_samples(2, 0.1, 0.05) == 2952
    assert S.required_samples(1, 1, 2 / math.e ** 2) == 4
    for bad in ((0.5, 0.1, 0.05), (1, 0, 0.05), (1, 0.1, 1.0)):
        with pytest.raises(ValueError):
            S.required_samples(*bad)


def test_exact_examples():
    assert S.exact_expectation(circuit(1, [], "Z")) == pytest.approx(1.0)
    assert S.exact_expectation(circuit(1, [(C.hadamard(), (0,))], "Z")) == pytest.approx(0.0)
    c = circuit(1, [(C.pauli_gate("X"), (0,)), (C.amplitude_damping(0.3), (0,))], "Z")
    assert S.exact_expectation(c) == pytest.approx(-0.4)
    t = circuit(1, [(C.hadamard(), (0,)), (C.t_gate(), (0,))], "X")
    assert S.exact_expectation(t) == pytest.approx(1 / np.sqrt(2))


def test_circuit_validation_and_json(tmp_path):
    with pytest.raises(ValueError):
        circuit(2, [(C.cz(), (0,))], "ZI")
    with pytest.raises(ValueError):
        circuit(2, [(C.t_gate(), (3,))], "ZI")
    with pytest.raises(ValueError):
        circuit(2, [], "Z")
    with pytest.raises(M.SizeLimitError):
        circuit(3, [(C.random_channel(3, np.random.default_rng(0)), (0, 1, 2))], "ZII")
    c = h_t_ad()
    back = S.CircuitSpec.from_json(c.to_json())
    assert S.exact_expectation(back) == pytest.approx(S.exact_expectation(c))
    with pytest.raises(C.ChannelParseError):
        S.CircuitSpec.from_json({"n": 1})


def test_precompute_examples():
    d = S.precompute_static(circuit(2, [(C.hadamard(), (0,)), (C.cnot(), (0, 1))], "ZZ"))
    assert all(x.p == 0 and len(x.tableaux[1]) == 0 for x in d)
    d = S.precompute_static(circuit(1, [(C.t_gate(), (0,))], "Z"))
    assert d[0].p == pytest.approx((np.sqrt(2) - 1) / 2)
    assert S.static_l1(d) == pytest.approx(np.sqrt(2))
    d = S.precompute_static(circuit(1, [(C.t_gate(), (0,))] * 2, "Z"))
    assert S.static_l1(d) == pytest.approx(2.0)


def test_decomposition_reconstructs_channel():
    ch = C.amplitude_damping(0.2)
    (d,) = S.precompute_static(circuit(1, [(ch, (0,))], "Z"))
    choi = np.zeros((4, 4), dtype=complex)
    for k, sgn in ((0, 1 + d.p), (1, -d.p)):
        for w, t in zip(d.weights[k], d.tableaux[k]):
            v = tableau_to_dense(t)
            choi += sgn * w * np.outer(v, v.conj())
    assert np.allclose(choi, C.choi_of(ch).rho, atol=1e-7)


@given(st.integers(0, 2 ** 31))
@settings(max_examples=20)
def test_branch_probabilities_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    n = 2
    els = [(C.random_channel(1, rng), (int(rng.integers(n)),)), (C.cs(), (0, 1)),
           (C.measure_t_basis(), (1,))]
    decomps = S.precompute_static(circuit(n, els, "ZZ"))
    state = StabilizerTableau.zero_state(n).apply_circuit_(random_clifford_gates(rng, n, 12))
    for d in decomps:
        for k in (0, 1):
            if len(d.tableaux[k]):
                probs = d.branch_probabilities(state, k)
                assert probs.min() >= -1e-12
                assert probs.sum() == pytest.approx(1.0, abs=1e-9)
                assert S.exact_probability_sum(state, d, k) == pytest.approx(probs.sum(), abs=1e-9)


def test_clifford_circuit_is_exact():
    c = circuit(2, [(C.hadamard(), (0,)), (C.cnot(), (0, 1)), (C.pauli_reset("-X"), (1,))], "IX")
    exact = S.exact_expectation(c)
    d = S.precompute_static(c)
    for res in (S.static_simulate(c, d, 50, 3), S.dynamic_simulate(c, 50, 3)):
        assert exact == pytest.approx(-1.0)
        assert res.estimate == pytest.approx(exact, abs=1e-12)
        assert res.stderr == 0.0
        assert res.l1_total == 1.0


def test_hadamard_conditional_chain_exact():
    c = circuit(1, [(C.hadamard(), (0,))] + [(C.hadamard_conditional(), (0,))] * 10, "Z")
    d = S.precompute_static(c)
    assert S.static_l1(d) == 1.0
    res = S.static_simulate(c, d, 200, 0)
    assert res.stderr == 0.0 or abs(res.estimate - S.exact_expectation(c)) < 4 * res.stderr + 1e-12


def test_single_t_both_methods():
    c = circuit(1, [(C.hadamard(), (0,)), (C.t_gate(), (0,))], "X")
    exact = 1 / np.sqrt(2)
    d = S.precompute_static(c)
    n = S.required_samples(S.static_l1(d), 0.1, 0.05)
    st_ = S.static_simulate(c, d, n, 42)
    dy = S.dynamic_simulate(c, n, 42)
    assert abs(st_.estimate - exact) <= 3 * st_.stderr
    assert abs(dy.estimate - exact) <= 3 * dy.stderr
    assert max(dy.step_r_max) == pytest.approx(np.sqrt(2), abs=1e-7)


def test_per_sample_bounds():
    c = h_t_ad()
    d = S.precompute_static(c)
    st_ = S.static_simulate(c, d, 300, 5)
    assert st_.max_abs_weight <= S.static_l1(d) + 1e-9
    assert st_.max_branch_error <= 1e-9
    cap = np.prod([M.capacity_value(ch) for ch, _ in c.elements])
    dy = S.dynamic_simulate(c, 300, 5)
    assert dy.max_abs_weight <= cap + 1e-9


def test_seed_determinism():
    c = h_t_ad()
    d = S.precompute_static(c)
    a = S.static_simulate(c, d, 400, 9)
    b = S.static_simulate(c, d, 400, 9, jobs=2)
    assert a.to_json() == b.to_json()
    assert S.static_simulate(c, d, 400, 10).estimate != a.estimate
    x = S.dynamic_simulate(c, 300, 9)
    y = S.dynamic_simulate(c, 300, 9, jobs=2)
    assert x.to_json() == y.to_json()


def test_unbiased_three_element_circuit():
    c = circuit(2, [(C.hadamard(), (0,)), (C.hadamard(), (1,)), (C.t_gate(), (0,)),
                    (C.compose(C.amplitude_damping(0.2), C.x_rotation(np.pi / 8)), (1,)),
                    (C.cz(), (0, 1))], "XX")
    exact = S.exact_expectation(c)
    d = S.precompute_static(c)
    n = S.required_samples(S.static_l1(d), 0.1, 0.05)
    hits = sum(abs(S.static_simulate(c, d, n, seed).estimate - exact) <= 0.1 for seed in range(20))
    assert hits >= 19


def test_dynamic_general_two_qubit_element():
    rng = np.random.default_rng(4)
    ch = C.random_channel(2, rng, rank=2)
    c = circuit(3, [(C.hadamard(), (0,)), (C.cnot(), (0, 1)), (C.hadamard(), (2,)),
                    (C.cnot(), (2, 0)), (ch, (1, 2))], "ZZZ")
    exact = S.exact_expectation(c)
    res = S.dynamic_simulate(c, 2000, 1)
    assert abs(res.estimate - exact) <= 4 * res.stderr + 1e-9


@given(st.integers(2, 5), st.integers(0, 2 ** 31))
@settings(max_examples=30)
def test_diagonal_disentangler(n, seed):
    rng = np.random.default_rng(seed)
    t = StabilizerTableau.zero_state(n).apply_circuit_(random_clifford_gates(rng, n, 25))
    m = int(rng.integers(1, min(n - 1, 3) + 1))
    a = sorted(rng.choice(n, m, replace=False).tolist())
    gates, w = S.diagonal_disentangler(t, a)
    rest = [q for q in range(n) if q not in a]
    # product across the cut
    assert entanglement_rank(w, a) == 0
    # controls on A, targets off A: commutes with any diagonal map on A
    for g, qs in gates:
        if len(qs) == 2:
            assert qs[0] in a and qs[1] in rest
        else:
            assert qs[0] in rest
    # a random diagonal unitary on A commutes with the circuit
    u = C.random_diagonal_unitary(m, rng).kraus_ops[0]
    v = tableau_to_dense(t)
    lhs = C.apply_operator(u, tableau_to_dense(w), a, n, density=False)
    gu = C.clifford_unitary(gates, n).kraus_ops[0]
    rhs = gu @ C.apply_operator(u, v, a, n, density=False)
    ph = np.vdot(lhs, rhs)
    assert abs(abs(ph) - 1) < 1e-9


@pytest.mark.slow
def test_dynamic_variance_below_static():
    ch = gap_channel()
    assert M.capacity_value(ch) < M.channel_robustness_value(ch) - 1e-3
    c = circuit(1, [(C.hadamard(), (0,))] + [(ch, (0,))] * 4, "X")
    n = 100_000
    d = S.precompute_static(c)
    st_ = S.static_simulate(c, d, n, 1)
    dy = S.dynamic_simulate(c, n, 1)
    # variance confidence intervals (normal approximation on the sample variance)
    vs, vd = (r.stderr ** 2 * n for r in (st_, dy))
    half = 3 * np.sqrt(2 / (n - 1))
    assert vd * (1 + half) < vs * (1 - half)


def test_block_diagonal_elements():
    els = [(C.t_gate(), (0,)), (C.t_gate(), (1,)), (C.s_gate(), (0,)), (C.cnot(), (0, 1)),
           (C.t_gate(), (1,)), (C.hadamard(), (0,))]
    c = circuit(2, [(C.hadamard(), (0,)), (C.hadamard(), (1,))] + els, "XX")
    b = S.block_diagonal_elements(c, 2)
    assert [qs for _, qs in b.elements] == [(0,), (1,), (0, 1), (0, 1), (1,), (0,)]
    assert S.exact_expectation(b) == pytest.approx(S.exact_expectation(c), abs=1e-12)
    one = S.block_diagonal_elements(c, 1)
    assert len(one.elements) == len(b.elements) + 1
    # T (x) T costs less than two separate T gates
    pair = circuit(2, [(C.t_gate(), (0,)), (C.t_gate(), (1,))], "ZZ")
    assert S.static_l1(S.precompute_static(S.block_diagonal_elements(pair, 2))) == pytest.approx(
        1.747546895706428, abs=1e-7)
    assert S.static_l1(S.precompute_static(pair)) == pytest.approx(2.0, abs=1e-7)
    with pytest.raises(ValueError):
        S.block_diagonal_elements(c, 0)
