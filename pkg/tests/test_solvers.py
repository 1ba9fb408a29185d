import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog, minimize

from sparsestab import certifiers as C
from sparsestab import solvers as S
from sparsestab.geometry import EpsSchedule
from sparsestab.numerics import Lp, MixedInfOne, norm


def _instance(seed, m=3, n=6, phi=MixedInfOne(0.5), tau=0.1, M="identity", mu=None):
    r = np.random.default_rng(seed)
    A = r.standard_normal((m, n))
    x0 = np.zeros(n)
    x0[r.choice(n, 2, replace=False)] = r.standard_normal(2)
    y = A @ x0 + 0.05 * r.standard_normal(m)
    return S.Instance(A, y, phi, M, tau, mu)


def _highs_ds(inst, W=None):
    """min sum w|x| s.t. alpha*max|r| + (1-alpha)*sum|r| <= tau, written with x = p - n and epigraphs."""
    n, q = inst.n, inst.q
    a = inst.alpha
    B, c = inst.MtA, inst.Mty
    w = np.ones(n) if W is None else W
    # variables p, n (n each), s (q, |r_i|), z (1, max |r|)
    nv = 2 * n + q + 1
    rows, rhs = [], []
    for sgn in (1.0, -1.0):
        rows.append(np.hstack([sgn * B, -sgn * B, -np.eye(q), np.zeros((q, 1))]))
        rhs.append(sgn * c)
        rows.append(np.hstack([sgn * B, -sgn * B, np.zeros((q, q)), -np.ones((q, 1))]))
        rhs.append(sgn * c)
    rows.append(np.concatenate([np.zeros(2 * n), (1 - a) * np.ones(q), [a]])[None, :])
    rhs.append([inst.tau])
    res = linprog(np.concatenate([w, w, np.zeros(q + 1)]), A_ub=np.vstack(rows), b_ub=np.concatenate(rhs),
                  bounds=[(0, None)] * nv, method="highs")
    assert res.status == 0
    return res.fun


@settings(max_examples=30)
@given(seed=st.integers(0, 2**32 - 1), alpha=st.sampled_from([0.0, 0.3, 0.5, 1.0]),
       tau=st.sampled_from([0.0, 0.01, 0.1, 1.0]), M=st.sampled_from(["identity", "same-as-A"]))
def test_linear_ds_matches_highs(seed, alpha, tau, M):
    inst = _instance(seed, phi=MixedInfOne(alpha), tau=tau, M=M)
    res = S.solve_ds_linear(inst)
    assert res.value == pytest.approx(_highs_ds(inst), rel=1e-7, abs=1e-8)
    assert np.abs(res.xstar).sum() == pytest.approx(res.value, rel=1e-8, abs=1e-9)
    assert norm(inst.residual(res.xstar), inst.phi) <= tau + 1e-8
    K = S.build_kkt(inst, S.LinearDS())
    assert K.max_residual(S.kkt_point(inst, res, S.LinearDS())) <= 1e-7


def test_exact_recovery_of_sparse_vector():
    A = np.array([[1.0, 0, 1], [0, 1, 1]])
    inst = S.Instance(A, A @ [0, 0, 1], MixedInfOne(1.0), "same-as-A", 0.0)
    assert np.allclose(S.solve_ds_linear(inst).xstar, [0, 0, 1], atol=1e-9)


def _slsqp_ds(inst):
    n = inst.n
    cons = [{"type": "ineq", "fun": lambda z: inst.tau**2 - np.sum(inst.residual(z[:n] - z[n:]) ** 2)}]
    best = np.inf
    for start in (np.zeros(2 * n), np.concatenate([np.maximum(np.linalg.pinv(inst.A) @ inst.y, 0),
                                                    np.maximum(-np.linalg.pinv(inst.A) @ inst.y, 0)])):
        res = minimize(lambda z: z.sum(), start, jac=lambda z: np.ones(2 * n), constraints=cons,
                       bounds=[(0, None)] * (2 * n), method="SLSQP", options={"ftol": 1e-13, "maxiter": 2000})
        if res.success:
            best = min(best, res.fun)
    return best


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_nonlinear_ds_l2(seed):
    inst = _instance(seed, m=2, n=4, phi=Lp(2), tau=0.1)
    res = S.solve_ds_nonlinear(inst, delta=0.01)
    assert norm(inst.residual(res.xstar), inst.phi) - inst.tau <= 1e-6 * inst.tau
    assert res.value == pytest.approx(_slsqp_ds(inst), rel=1e-4)
    values = [t["value"] for t in res.trace]
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))
    stats = [t["hausdorff"] for t in res.trace]
    assert all(b <= a + 1e-12 for a, b in zip(stats, stats[1:]))
    assert stats[-1] <= 0.01
    K = S.build_kkt(inst, S.NonlinearDS(res.polytope))
    assert K.max_residual(S.kkt_point(inst, res, S.NonlinearDS(res.polytope))) <= 1e-7


def test_nonlinear_ds_dispatches_polyhedral_norms():
    inst = _instance(4, phi=Lp(np.inf), tau=0.05)
    res = S.solve_ds_nonlinear(inst)
    assert res.kind == "nonlinear-ds(linear)"
    assert res.value == pytest.approx(_highs_ds(inst), rel=1e-7)


def _l1_ball_projection(v, mu):
    if np.abs(v).sum() <= mu:
        return v
    u = np.sort(np.abs(v))[::-1]
    css = np.cumsum(u)
    k = np.nonzero(u * np.arange(1, v.size + 1) > css - mu)[0][-1]
    theta = (css[k] - mu) / (k + 1)
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0)


def _projected_gradient_lasso(inst, iters=200_000):
    # least squares over the l1 ball has the same minimiser as the l2 residual norm
    B = inst.MtA
    step = 1 / np.linalg.norm(B, 2) ** 2
    x = np.zeros(inst.n)
    for _ in range(iters):
        nxt = _l1_ball_projection(x - step * B.T @ (B @ x - inst.Mty), inst.mu)
        if np.max(np.abs(nxt - x)) < 1e-15:
            break
        x = nxt
    return np.linalg.norm(inst.residual(x))


@pytest.mark.parametrize("seed, mu", [(1, 0.3), (2, 1.0), (5, 0.5)])
def test_lasso_l2_matches_projected_gradient(seed, mu):
    inst = _instance(seed, m=2, n=4, phi=Lp(2), tau=None, mu=mu)
    res = S.solve_lasso(inst, delta=0.001)
    assert np.abs(res.xstar).sum() <= mu * (1 + 1e-9)
    oracle = _projected_gradient_lasso(inst)
    assert res.value == pytest.approx(oracle, rel=1e-4, abs=1e-8)
    values = [t["value"] for t in res.trace]
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))
    K = S.build_kkt(inst, S.Lasso(res.polytope))
    assert K.max_residual(S.kkt_point(inst, res, S.Lasso(res.polytope))) <= 1e-7


def test_lasso_polyhedral_norm_is_exact():
    inst = _instance(3, phi=Lp(np.inf), tau=None, mu=0.5)
    res = S.solve_lasso(inst)
    assert res.trace[-1]["hausdorff"] == 0.0
    assert norm(inst.residual(res.xstar), inst.phi) == pytest.approx(res.value, abs=1e-9)


def _weak_rsp_instance():
    for seed in range(50):
        inst = _instance(seed, m=3, n=5)
        rep = C.weak_rsp(inst.A, 1)
        if rep.holds:
            return inst, rep
    raise AssertionError("no weak-RSP instance in 50 draws")


@pytest.mark.parametrize("phi", [MixedInfOne(0.0), MixedInfOne(0.5), MixedInfOne(1.0)])
def test_linear_dual_certificate_is_feasible(phi):
    inst, rep = _weak_rsp_instance()
    inst = inst.replace(phi=phi)
    x = np.zeros(inst.n)
    x[2] = -1.5
    x[0] = 0.1
    S1, S2 = S.sign_pattern(x, 1)
    cert = next(c for c in rep.certificates if tuple(c["S1"]) == S1 and tuple(c["S2"]) == S2)
    dc = S.construct_dual_certificate(inst, x, 1, cert["zeta"], cert["u"], S.LinearDS())
    assert S.dual_residual(inst, S.LinearDS(), dc.w) <= 1e-9
    comb = dc.w["w4"] - dc.w["w5"] - dc.w["w6"] + dc.w["w7"]
    assert np.allclose(comb, dc.h)


def test_relaxation_dual_certificates_are_feasible():
    inst, rep = _weak_rsp_instance()
    x = np.zeros(inst.n)
    x[1] = 2.0
    S1, S2 = S.sign_pattern(x, 1)
    cert = next(c for c in rep.certificates if tuple(c["S1"]) == S1 and tuple(c["S2"]) == S2)
    ds = S.solve_ds_nonlinear(inst.replace(phi=Lp(2), tau=0.1))
    lasso = S.solve_lasso(inst.replace(phi=Lp(2), tau=None, mu=1.0))
    for variant in (S.NonlinearDS(ds.polytope), S.Lasso(lasso.polytope)):
        I = inst.replace(phi=Lp(2), tau=0.1, mu=1.0)
        dc = S.construct_dual_certificate(I, x, 1, cert["zeta"], cert["u"], variant)
        assert S.dual_residual(I, variant, dc.w) <= 1e-9


def test_certificate_rejects_wrong_pattern():
    inst, rep = _weak_rsp_instance()
    x = np.zeros(inst.n)
    x[0] = 1.0
    cert = next(c for c in rep.certificates if c["S2"] == [0])
    with pytest.raises(S.PatternInfeasible):
        S.construct_dual_certificate(inst, x, 1, cert["zeta"], cert["u"], S.LinearDS())


def test_first_invertible_columns():
    assert S.first_invertible_columns(np.array([[0.0, 1, 0], [0, 0, 1]])) == (1, 2)
    with pytest.raises(S.BadInstance):
        S.first_invertible_columns(np.array([[1.0, 2], [2, 4]]))


@settings(max_examples=15)
@given(seed=st.integers(0, 2**32 - 1))
def test_weighted_transform(seed):
    inst = _instance(seed, phi=MixedInfOne(0.5), tau=0.05)
    w = np.random.default_rng(seed).uniform(0.5, 2.0, inst.n)
    res = S.solve_ds_linear(S.weighted_ds_transform(inst, np.diag(w)))
    # the transformed problem is in u = W x, so its value is the weighted l1 optimum
    assert res.value == pytest.approx(_highs_ds(inst, w), rel=1e-7, abs=1e-8)
    x = res.xstar / w
    assert norm(inst.residual(x), inst.phi) <= inst.tau + 1e-8


def test_weighted_transform_rejects_singular():
    inst = _instance(0)
    with pytest.raises(S.SingularWeight):
        S.weighted_ds_transform(inst, np.diag([1, 1, 0, 1, 1, 1.0]))


def test_instance_validation_and_round_trip():
    inst = _instance(0, M="same-as-A")
    back = S.Instance.from_json(json.dumps(inst.to_dict()))
    assert np.array_equal(back.A, inst.A) and np.array_equal(back.M, inst.M) and back.tau == inst.tau
    with pytest.raises(S.BadInstance):
        S.Instance(np.ones((3, 3)), np.ones(3), Lp(2))
    with pytest.raises(S.BadInstance):
        S.Instance(np.array([[1.0, 2, 3], [2, 4, 6]]), np.ones(2), Lp(2))
    with pytest.raises(S.BadInstance):
        S.Instance(np.eye(2, 3), np.ones(2), Lp(2), tau=-1.0)


def test_solution_set_contains_optimum():
    inst = _instance(7, phi=MixedInfOne(0.5), tau=0.1)
    res = S.solve_ds_linear(inst)
    assert S.ds_solution_set(inst, res.value).contains(res.xstar, 1e-8)


def test_schedule_argument():
    inst = _instance(2, m=2, n=4, phi=Lp(3), tau=0.2)
    res = S.solve_ds_nonlinear(inst, EpsSchedule(eps1=0.25, ratio=0.5), delta=0.02)
    assert norm(inst.residual(res.xstar), inst.phi) <= 0.2 * (1 + 1e-6)
