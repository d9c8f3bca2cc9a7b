import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chanmagic import channels as C
from chanmagic import monotones as M
from chanmagic import symmetry as Y
from chanmagic.pauli_basis import density_from_pauli_vector, pauli_vector
from chanmagic.stab_catalog import enumerate_states


def permute_dense(rho, perm, n):
    """Move qubit q to position perm[q] (big-endian qubit order)."""
    t = rho.reshape([2] * (2 * n))
    axes = [0] * n
    for q in range(n):
        axes[perm[q]] = q
    return t.transpose(axes + [n + a for a in axes]).reshape(rho.shape)


@pytest.mark.parametrize("n", [2, 3])
def test_permute_indices_matches_dense(n, rng):
    a = rng.normal(size=(2 ** n, 2 ** n)) + 1j * rng.normal(size=(2 ** n, 2 ** n))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    b = pauli_vector(rho)
    for perm in itertools.permutations(range(n)):
        m = Y.permute_pauli_indices(n, perm)
        want = pauli_vector(permute_dense(rho, perm, n))
        got = np.zeros_like(b)
        got[m] = b
        assert np.allclose(got, want)


def test_invariant_permutations_form_group():
    b = pauli_vector(C.multicontrol_phase(1, 4)(M.plus_state_density(4)))
    assert len(Y.invariant_permutations(b, 4)) == 24
    v = np.kron(np.ones(4) / 2, np.array([1, 0]))  # |++0>
    perms = Y.invariant_permutations(pauli_vector(np.outer(v, v)), 3)
    assert sorted(perms) == [(0, 1, 2), (1, 0, 2)]
    comp = {tuple(p[q] for q in r) for p in perms for r in perms}
    assert comp == set(perms)


def test_orbits_are_unions_under_the_group():
    perms = list(itertools.permutations(range(3)))
    cls, r = Y.pauli_orbits(3, perms)
    assert r == 20  # multisets of size 3 over {I, X, Y, Z}
    for p in perms:
        assert np.array_equal(cls[Y.permute_pauli_indices(3, p)], cls)


def symmetric_state(n, rng):
    """Random state invariant under all qubit permutations: a mixture of t^{(x)n}."""
    rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for w in rng.dirichlet(np.ones(3)):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        s = v
        for _ in range(n - 1):
            s = np.kron(s, v)
        rho += w * np.outer(s, s.conj())
    return rho


@given(st.integers(0, 2 ** 31))
@settings(max_examples=10)
def test_reduced_lp_matches_full(seed):
    rng = np.random.default_rng(seed)
    n = 3
    b = pauli_vector(symmetric_state(n, rng))
    full = M.robustness_from_pauli_vector(b, n, symmetric=False)
    red = M.robustness_from_pauli_vector(b, n, symmetric=True)
    assert red.value == pytest.approx(full.value, abs=1e-7)
    assert np.allclose(red.decomposition.reconstruct(enumerate_states(n)), b, atol=1e-9)
    assert red.decomposition.l1_norm == pytest.approx(red.value, abs=1e-7)
    # the expanded dual is a valid witness on every stabiliser state
    assert (enumerate_states(n).rmatvec(red.witness.y) - 1).max() <= 1e-7
    assert red.witness.value(density_from_pauli_vector(b)) == pytest.approx(red.value - 1, abs=1e-7)


@pytest.mark.parametrize("t,n", [(2, 3), (1, 3), (2, 4)])
def test_reduced_channel_robustness_matches_full(t, n):
    ch = C.multicontrol_phase(t, n)
    full = M.channel_robustness(ch, symmetric=False)
    red = M.channel_robustness(ch, symmetric=True)
    assert red.value == pytest.approx(full.value, abs=1e-7)
    assert np.allclose(red.choi_pauli_vector(), C.choi_of(ch).pauli_vector, atol=1e-8)


def test_reduction_without_symmetry_falls_back():
    rho = C.random_channel(1, np.random.default_rng(3))(np.diag([0.3, 0.7]).astype(complex))
    b = pauli_vector(np.kron(rho, np.diag([1.0, 0.0])))
    assert Y.invariant_permutations(b, 2) == [(0, 1)]
    assert M.robustness_from_pauli_vector(b, 2, symmetric=True).value == pytest.approx(
        M.robustness_from_pauli_vector(b, 2, symmetric=False).value, abs=1e-9)
