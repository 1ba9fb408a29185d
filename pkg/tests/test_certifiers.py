import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsestab import certifiers as C
from sparsestab import lp

A3 = np.array([[1.0, 0, 1], [0, 1, 1]])
A_FAIL = np.array([[1.0, 0, 0], [0, 1, 0]])
A_RIP = np.array([[1.0, 0, 1 / math.sqrt(2)], [0, 1, 1 / math.sqrt(2)]])


def test_sign_patterns_count_and_order():
    pats = C.sign_patterns(3, 2)
    assert len(pats) == C.pattern_count(3, 2) == 1 + 6 + 12
    assert pats[0] == ((), ())
    sizes = [len(a) + len(b) for a, b in pats]
    assert sizes == sorted(sizes)
    assert all(not set(a) & set(b) for a, b in pats)


def test_weak_rsp_examples():
    rep = C.weak_rsp(A_FAIL, 1)
    assert not rep.holds and 2 in rep.counterexample["S1"] + rep.counterexample["S2"]
    rep = C.weak_rsp(A3, 1)
    assert rep.holds
    for c in rep.certificates:
        assert C.check_range_certificate(A3, c["S1"], c["S2"], c["u"])
    assert C.check_range_certificate(A3, [0], [], [1, -0.5])
    assert C.weak_rsp(A_FAIL, 0).holds


def test_rsp_examples():
    assert C.rsp(A3, 1).holds
    dup = np.array([[1.0, 1, 0], [0, 0, 1]])
    assert C.weak_rsp(dup, 1).holds and not C.rsp(dup, 1).holds
    assert C.rsp(A_FAIL, 0).holds


def test_nsp_examples():
    rep = C.nsp(A3, 1, "stable")
    assert rep.holds and rep.value == pytest.approx(0.5)
    assert C.nsp(A3, 1).holds
    rep = C.nsp(np.array([[1.0, -1.0]]), 1)
    assert not rep.holds
    assert C.nsp(np.array([[1.0, -1.0]]), 0).holds


def test_nsp_counterexample_is_a_null_vector():
    A = np.random.default_rng(3).standard_normal((2, 6))
    rep = C.nsp(A, 2)
    assert not rep.holds
    z = np.asarray(rep.counterexample["zeta"])
    S = rep.counterexample["S"]
    assert np.allclose(A @ z, 0, atol=1e-9)
    off = [i for i in range(6) if i not in S]
    assert np.abs(z[S]).sum() >= np.abs(z[off]).sum() * (1 - 1e-9)


def test_robust_nsp_reports_constants():
    rep = C.nsp(A3, 1, "robust")
    assert rep.holds and rep.notes["rho1"] > rep.notes["stable_constant"]
    assert rep.notes["rho2_estimate"] >= 0


def test_rip_examples():
    assert C.rip_delta(np.eye(3), 2) == pytest.approx(0.0, abs=1e-14)
    assert C.rip_delta(A_RIP, 2) == pytest.approx(1 / math.sqrt(2))


@settings(max_examples=20)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 3))
def test_rip_against_lapack(seed, k):
    A = np.random.default_rng(seed).standard_normal((4, 6)) / 2
    worst = 0.0
    for S in itertools.combinations(range(6), k):
        ev = np.linalg.eigvalsh(A[:, S].T @ A[:, S])
        worst = max(worst, ev[-1] - 1, 1 - ev[0])
    assert C.rip_delta(A, k) == pytest.approx(worst, abs=1e-10)


def test_coherence_examples():
    assert C.mutual_coherence_mu1(np.eye(3), 1) == 0.0 and C.coherence_gate(np.eye(3), 1)
    dup = np.array([[1.0, 1, 0], [0, 0, 1]])
    assert C.mutual_coherence_mu1(dup, 1) == pytest.approx(1.0) and not C.coherence_gate(dup, 1)
    assert C.mutual_coherence_mu1(A_RIP, 1) == pytest.approx(1 / math.sqrt(2))
    assert C.mutual_coherence_mu1(A_RIP, 2) == pytest.approx(math.sqrt(2))


def test_size_caps():
    with pytest.raises(lp.SizeLimit):
        C.weak_rsp(np.ones((2, 17)), 1)
    with pytest.raises(lp.SizeLimit):
        C.nsp(np.random.default_rng(0).standard_normal((1, 14)), 1)


@settings(max_examples=12, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.sampled_from([1, 2]))
def test_implication_chain(seed, k):
    A = np.random.default_rng(seed).standard_normal((4, 8))
    w, r = C.weak_rsp(A, k).holds, C.rsp(A, k).holds
    n = C.nsp(A, k).holds
    assert not r or w
    assert r == n
    if C.rip_gate(A, k):
        assert n
    if C.coherence_gate(A, k):
        # the gate is a statement about the column-normalised matrix
        An, _ = C.normalize_columns(A)
        assert C.nsp(An, k).holds and C.weak_rsp(An, k).holds


def test_necessity_probe():
    out = C.necessity_probe(A_FAIL, 1, [0.0, 1e-3, 1e-2], pattern=([2], []))
    assert out["success"]
    assert all(run["error"] == pytest.approx(1.0, abs=1e-9) for run in out["runs"])
    with pytest.raises(C.PatternMissing):
        C.necessity_probe(A3, 1, [0.0])


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_rip_gate_fires_and_implies_nsp(seed):
    # identity plus one spread unit column: every 2-column Gram deviates by at most 1/2
    r = np.random.default_rng(seed)
    v = np.abs(r.uniform(0.8, 1.2, 4)) * r.choice([-1.0, 1.0], 4)
    A = np.hstack([np.eye(4), (v / np.linalg.norm(v))[:, None]])
    assert C.rip_gate(A, 1)
    assert C.nsp(A, 1).holds and C.rsp(A, 1).holds
