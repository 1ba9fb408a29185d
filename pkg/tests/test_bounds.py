import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsestab import bounds as B
from sparsestab import solvers as S
from sparsestab.numerics import MixedInfOne, Lp

A3 = np.array([[1.0, 0, 1], [0, 1, 1]])


def test_hoffman_mu_examples():
    assert B.hoffman_mu(None, np.eye(2)).value == pytest.approx(1.0)
    assert B.hoffman_mu(None, [[1.0, 1.0]]).value == pytest.approx(0.5)
    assert np.isfinite(B.hoffman_mu([[-1.0]], None).value)


@settings(max_examples=15)
@given(seed=st.integers(0, 2**32 - 1))
def test_sampled_mu_is_a_lower_bound(seed):
    r = np.random.default_rng(seed)
    Mp, Mpp = r.standard_normal((2, 3)), r.standard_normal((1, 3))
    exact = B.hoffman_mu(Mp, Mpp).value
    low = B.hoffman_mu(Mp, Mpp, B.SAMPLED, samples=100, seed=seed).value
    assert low <= exact * (1 + 1e-7) + 1e-9


def test_hoffman_mu_size_cap():
    with pytest.raises(B.lp.SizeLimit):
        B.hoffman_mu(np.ones((11, 2)), None)


def test_robinson_sigma_dominates_every_subset():
    r = np.random.default_rng(1)
    M1, M2 = r.standard_normal((2, 3)), r.standard_normal((1, 3))
    sigma = B.robinson_sigma(M1, M2).value
    vals = [B.hoffman_mu(*B.robinson_pair(M1, M2, S), strict=False).value
            for size in range(3) for S in itertools.combinations(range(2), size)]
    assert sigma == pytest.approx(max(vals))
    no_rows = B.robinson_sigma(None, M2).value
    assert no_rows == pytest.approx(B.hoffman_mu(*B.robinson_pair(np.zeros((0, 3)), M2, ()), strict=False).value)


def test_hoffman_lemma_on_point_set():
    # L = {0}; ||x||_2 <= sigma ||x||_1 needs sigma >= 1
    rep = B.verify_hoffman_lemma(None, np.eye(2), None, np.zeros(2), probes=200)
    assert rep["sigma"] >= 1 - 1e-9 and rep["holds"]


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_hoffman_lemma_random_tiny(seed):
    r = np.random.default_rng(seed)
    M1, M2 = r.standard_normal((3, 3)), r.standard_normal((1, 3))
    x0 = r.standard_normal(3)
    rep = B.verify_hoffman_lemma(M1, M2, M1 @ x0 + np.abs(r.standard_normal(3)), M2 @ x0, probes=200, seed=seed)
    assert rep["failures"] == 0 and rep["min_slack"] >= -1e-7 and rep["worst_ratio"] <= rep["sigma"] + 1e-9


def test_hoffman_lemma_empty():
    with pytest.raises(B.EmptyPolyhedron):
        B.verify_hoffman_lemma([[1.0], [-1.0]], None, [-1.0, 0.0], None)


def _inf_to_one(Q):
    return max(np.abs(Q @ np.array(s)).sum() for s in itertools.product((1, -1), repeat=Q.shape[1]))


def test_constant_c_identity_is_single_term():
    expected = _inf_to_one(np.linalg.solve(A3 @ A3.T, A3))
    assert B.constant_c(np.eye(2), A3) == pytest.approx(expected)


def test_constant_c_orthonormal_square():
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))
    assert B.constant_c(np.eye(3), Q) == pytest.approx(_inf_to_one(Q))


@settings(max_examples=15)
@given(seed=st.integers(0, 2**32 - 1))
def test_constant_c_subset_dominance(seed):
    r = np.random.default_rng(seed)
    A, M = r.standard_normal((2, 4)), r.standard_normal((2, 3))
    M2 = np.hstack([M, M[:, :1]])
    assert B.constant_c(M2, A) >= B.constant_c(M, A) * (1 - 1e-12)


def test_constant_c_needs_invertible_submatrix():
    with pytest.raises(B.NoInvertibleSubmatrix):
        B.constant_c(np.array([[1.0, 2], [2, 4]]), A3)


def _K(**kw):
    base = {"gamma": 1.0, "c": 2.0, "sigma_k": 0.5, "tau": 0.1, "alpha": 1.0, "res_inf": 0.05,
            "res_one": 0.08, "res_phi": 0.07, "mu": 1.0, "l1": 1.2, "delta": 0.01, "nhat": 10}
    base.update(kw)
    return base


@pytest.mark.parametrize("theorem, expected", [
    # gamma (viol + 2 sigma + c (tau + res_inf)), viol = max(res_inf - tau, 0) = 0
    ("T3.2-INQ-AA", 1.0 + 2 * 0.15),
    # 2 gamma (sigma + c tau)
    ("T3.2-INQ-new", 2 * (0.5 + 0.2)),
    ("C3.4-E2", 2 * (0.5 + 0.2)),
    # delta + 2 gamma (nhat (phi - tau)_+ + 2 sigma + c tau + c phi)
    ("T4.5-ll2", 0.01 + 2 * (0 + 1.0 + 0.2 + 0.14)),
    # delta + 4 gamma (sigma + c tau)
    ("T4.5-45", 0.01 + 4 * (0.5 + 0.2)),
    # delta + 2 gamma ((l1 - mu)_+ + 2 phi + (|mu - l1| + 2 sigma) / c)
    ("T5.3-l2", 0.01 + 2 * (0.2 + 0.14 + (0.2 + 1.0) / 2)),
    ("T5.3-1616", 0.01 + 2 * (0.14 + (0.2 + 1.0) / 2)),
    # delta + 4 gamma (phi + sigma / c)
    ("C5.4-FFNN", 0.01 + 4 * (0.07 + 0.25)),
])
def test_bound_formulas(theorem, expected):
    rhs, tight, offset, kern = B.bound_rhs(theorem, _K())
    assert rhs == pytest.approx(expected)
    assert tight <= rhs + 1e-12
    assert rhs == pytest.approx(offset + 1.0 * kern)


def test_bound_rhs_scales_with_gamma():
    for theorem in B.BOUND_IDS:
        r1 = B.bound_rhs(theorem, _K(gamma=1.0))
        r2 = B.bound_rhs(theorem, _K(gamma=3.0))
        assert r2[0] - r2[2] == pytest.approx(3 * (r1[0] - r1[2]))


def test_missing_constants():
    with pytest.raises(B.MissingConstant):
        B.bound_rhs("T4.5-ll2", _K(nhat=None))
    with pytest.raises(B.MissingConstant):
        B.bound_rhs("T5.3-l2", _K(delta=None))


def test_pipeline_on_small_instance():
    inst = S.Instance(A3, A3 @ [0, 0, 0.7], MixedInfOne(1.0), "same-as-A", 0.05)
    res = S.solve_ds_linear(inst)
    xhat = np.array([0, 0, 0.7])
    rep = B.evaluate_bound("T3.2-INQ-AA", inst, xhat, res, 1, 1.0)
    assert rep.satisfied
    assert B.recompute_rhs(rep) == pytest.approx(rep.rhs)
    fed_back = B.evaluate_bound("T3.2-INQ-new", inst, res.xstar, res, 1, 1.0, {"xstar": res.xstar})
    assert fed_back.error == 0.0 and fed_back.satisfied


def test_sparse_exact_case_has_zero_kernel():
    inst = S.Instance(A3, A3 @ [0, 0, 1.0], MixedInfOne(1.0), "same-as-A", 0.0)
    rep = B.evaluate_bound("T3.2-INQ-new", inst, [0, 0, 1.0], S.solve_ds_linear(inst), 1, 1.0)
    assert rep.rhs == 0.0 and rep.error <= 1e-9


@settings(max_examples=25)
@given(seed=st.integers(0, 2**32 - 1))
def test_inq_new_majorisation_chain(seed):
    # for feasible points res_inf <= tau, so the tight form never exceeds 2 gamma (sigma + c tau)
    r = np.random.default_rng(seed)
    inst = S.Instance(A3, r.standard_normal(2), MixedInfOne(1.0), "same-as-A", 0.1)
    x = np.linalg.pinv(inst.MtA) @ inst.Mty + np.array([1, 1, -1]) * r.standard_normal()
    rep = B.evaluate_bound("T3.2-INQ-new", inst, x, None, 1, 2.0, {"xstar": np.zeros(3)})
    assert rep.rhs_tight <= rep.rhs * (1 + 1e-12)


def test_empirical_gamma_running_max():
    reps = []
    inst = S.Instance(A3, [1.0, 1.0], Lp(np.inf), "same-as-A", 0.1)
    res = S.solve_ds_linear(inst)
    r = np.random.default_rng(0)
    values = []
    for _ in range(10):
        reps.append(B.evaluate_bound("T3.2-INQ-new", inst, r.standard_normal(3), res, 1, 1.0))
        values.append(B.empirical_gamma(reps)[0])
    assert values == sorted(values)
    assert B.kernel_ratio(0.0, 1.0) == 0.0
