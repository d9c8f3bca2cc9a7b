import numpy as np
import pytest
from hypothesis import given, strategies as st

from chanmagic import lp
from chanmagic.stab_catalog import enumerate_states


def random_feasible(seed, m, N):
    rng = np.random.default_rng(seed)
    a = rng.integers(-1, 2, size=(m, N)).astype(float)
    a[0] = 1.0
    x0 = rng.random(N) * (rng.random(N) < 0.5)
    x0[0] += 0.1
    return a, a @ x0, rng.random(N) + 0.5


@given(st.integers(0, 2 ** 31), st.integers(2, 6), st.integers(6, 30))
def test_simplex_matches_highs(seed, m, N):
    a, b, c = random_feasible(seed, m, N)
    src = lp.DenseSource(a, c)
    ours = lp.solve_lp(src, b, "simplex")
    ref = lp.solve_lp(src, b, "highs")
    assert ours.status == ref.status == "optimal"
    assert ours.objective == pytest.approx(ref.objective, abs=1e-7)
    assert np.allclose(a @ ours.x, b, atol=1e-7)
    assert ours.x.min() >= 0
    # dual feasibility and strong duality
    assert np.all(c - a.T @ ours.y >= -1e-7)
    assert b @ ours.y == pytest.approx(ours.objective, abs=1e-7)


def test_infeasible():
    a = np.array([[1.0, 1.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0])
    assert lp.solve_lp(lp.DenseSource(a), b).status == "infeasible"
    assert lp.solve_lp(lp.DenseSource(a), b, "highs").status == "infeasible"


def test_degenerate_problem():
    # many tied ratios: every column of a 3-qubit catalogue on the maximally mixed state
    cat = enumerate_states(3)
    src = lp.StabPairSource(cat)
    b = np.zeros(64)
    b[0] = 1.0
    res = lp.solve_lp(src, b)
    assert res.objective == pytest.approx(1.0, abs=1e-9)


def test_pair_source_matches_dense():
    cat = enumerate_states(2)
    src = lp.StabPairSource(cat, extra_rows=[1, 5])
    full = src.to_matrix()
    assert full.shape == (18, 120)
    y = np.random.default_rng(2).normal(size=18)
    assert np.allclose(src.rmatvec(y), full.T @ y)
    pos = lp.StabPairSource(cat, positive_only=True)
    assert np.allclose(pos.to_matrix(), cat.dense_A())


def test_unknown_backend():
    with pytest.raises(ValueError):
        lp.solve_lp(lp.DenseSource(np.eye(2)), np.ones(2), "cplex")


def test_configure_roundtrip():
    saved = dict(lp.SOLVER_OPTIONS)
    try:
        lp.configure(tol=1e-8, max_iter=5)
        assert lp.SOLVER_OPTIONS == {"tol": 1e-8, "max_iter": 5}
    finally:
        lp.SOLVER_OPTIONS.clear()
        lp.SOLVER_OPTIONS.update(saved)
