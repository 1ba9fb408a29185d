import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from sparsestab import lp
from sparsestab.lp import LpProblem


def test_simple_min():
    p = LpProblem([1, 1], G=[[-1, -1]], h=[-1], lb=[0, 0])
    s = lp.solve(p)
    assert s.optimal and s.value == pytest.approx(1.0)


def test_infeasible_max():
    p = LpProblem([1], G=[[1], [-1]], h=[0, -1], sense="max")
    assert lp.solve(p).status == lp.INFEASIBLE


def test_unbounded():
    assert lp.solve(LpProblem([1], lb=[0], sense="max")).status == lp.UNBOUNDED


def test_l1_basis_pursuit_by_splitting():
    A = np.array([[1.0, 0, 1], [0, 1, 1]])
    y = np.array([1.0, 1])
    # x = xp - xn with both parts nonnegative
    p = LpProblem(np.ones(6), E=np.hstack([A, -A]), f=y, lb=np.zeros(6))
    s = lp.solve(p)
    assert s.value == pytest.approx(1.0)
    assert np.allclose(s.x[:3] - s.x[3:], [0, 0, 1])


@pytest.mark.parametrize("G, h, expected", [
    ([[1.0], [-1.0]], [1.0, 0.0], True),
    ([[1.0], [-1.0]], [-1.0, 0.0], False),
])
def test_feasible(G, h, expected):
    assert lp.feasible(LpProblem([0.0], G, h))[0] is expected


def test_weak_rsp_pattern_infeasible():
    # third column of A is zero, so (A^T u)_3 = 1 has no solution
    A = np.array([[1.0, 0, 0], [0, 1, 0]])
    p = LpProblem(np.zeros(2), G=np.vstack([A[:, :2].T, -A[:, :2].T]), h=np.ones(4), E=A[:, 2:].T, f=[1.0])
    assert not lp.feasible(p)[0]


def _random_lp(r, tall=False):
    n = int(r.integers(1, 6))
    rows = int(r.integers(70, 120)) if tall else int(r.integers(1, 10))
    G = r.standard_normal((rows, n))
    x0 = r.standard_normal(n)
    h = G @ x0 + r.uniform(0, 1, rows) * (r.uniform() < 0.9)
    eq = int(r.integers(0, min(n, 3) + 1)) if not tall else 0
    E = r.standard_normal((eq, n))
    f = E @ x0
    box = r.uniform() < 0.5
    lb = x0 - r.uniform(0.5, 2, n) if box else None
    ub = x0 + r.uniform(0.5, 2, n) if box else None
    c = r.standard_normal(n)
    if r.uniform() < 0.1:
        h = h - 50  # often infeasible
    return LpProblem(c, G, h, E if eq else None, f if eq else None, lb, ub)


def _scipy(p):
    bounds = list(zip([None if not np.isfinite(v) else v for v in p.lb],
                      [None if not np.isfinite(v) else v for v in p.ub]))
    res = linprog(p.c, A_ub=p.G if p.h.size else None, b_ub=p.h if p.h.size else None,
                  A_eq=p.E if p.f.size else None, b_eq=p.f if p.f.size else None, bounds=bounds, method="highs")
    return {0: lp.OPTIMAL, 2: lp.INFEASIBLE, 3: lp.UNBOUNDED}.get(res.status), res.fun


@pytest.mark.parametrize("tall", [False, True])
@settings(max_examples=60)
@given(seed=st.integers(0, 2**32 - 1))
def test_against_highs(tall, seed):
    p = _random_lp(np.random.default_rng(seed), tall)
    s = lp.solve(p)
    status, value = _scipy(p)
    assert s.status == status
    if status == lp.OPTIMAL:
        assert s.value == pytest.approx(value, rel=1e-7, abs=1e-7)
        kkt = lp.kkt_residuals(p, s)
        assert max(kkt.values()) <= 1e-7


@settings(max_examples=30)
@given(seed=st.integers(0, 2**32 - 1))
def test_row_permutation_invariance(seed):
    r = np.random.default_rng(seed)
    p = _random_lp(r)
    a, b = lp.solve(p), lp.solve(p.permuted(r.permutation(p.h.size), r.permutation(p.f.size)))
    assert a.status == b.status
    if a.optimal:
        assert a.value == pytest.approx(b.value, rel=1e-8, abs=1e-8)


def test_max_sense_duals_nonnegative():
    p = LpProblem([1.0, 2.0], G=[[1, 1], [1, 0]], h=[1, 0.5], lb=[0, 0], sense="max")
    s = lp.solve(p)
    assert s.value == pytest.approx(2.0)
    assert np.all(s.ineq_duals >= -1e-12)
    assert lp.dual_value(p, s) == pytest.approx(2.0)


def test_to_text_lists_rows():
    txt = lp.to_text(LpProblem([1, -1], G=[[1, 0]], h=[2], E=[[1, 1]], f=[1], lb=[0, -np.inf]))
    assert "r0:" in txt and "e0:" in txt and txt.startswith("min")


def _as_set(V):
    return sorted(tuple(np.round(v, 9)) for v in V)


def test_vertices_of_square():
    G = np.vstack([np.eye(2), -np.eye(2)])
    V = lp.enumerate_vertices(G, np.ones(4))
    assert _as_set(V) == _as_set([(1, 1), (1, -1), (-1, 1), (-1, -1)])


def test_vertices_of_triangle():
    V = lp.enumerate_vertices([[-1, 0], [0, -1], [1, 1]], [0, 0, 1])
    assert _as_set(V) == _as_set([(0, 0), (1, 0), (0, 1)])


def test_vertices_of_cross_polytope():
    G = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    V = lp.enumerate_vertices(G, np.ones(4))
    assert _as_set(V) == _as_set([(1, 0), (-1, 0), (0, 1), (0, -1)])


def test_vertex_enumeration_errors():
    with pytest.raises(lp.Unbounded):
        lp.enumerate_vertices([[1.0, 0.0]], [1.0])
    with pytest.raises(lp.SizeLimit):
        lp.enumerate_vertices(np.ones((41, 2)), np.ones(41))


@settings(max_examples=25)
@given(seed=st.integers(0, 2**32 - 1))
def test_vertices_maximise_linear_objectives(seed):
    # every LP optimum over a polytope is attained at one of its vertices
    r = np.random.default_rng(seed)
    d = int(r.integers(2, 4))
    G = r.standard_normal((int(r.integers(d + 1, 9)), d))
    G = np.vstack([G, np.eye(d), -np.eye(d)])
    h = np.abs(r.standard_normal(G.shape[0])) + 0.1
    V = lp.enumerate_vertices(G, h)
    c = r.standard_normal(d)
    s = lp.solve(LpProblem(c, G, h, sense="max"))
    assert (V @ c).max() == pytest.approx(s.value, rel=1e-8, abs=1e-9)
    assert np.all(V @ G.T <= h + 1e-8)
