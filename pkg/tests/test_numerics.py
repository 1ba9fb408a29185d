import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sparsestab.numerics import (
    ColumnLimitExceeded,
    Lp,
    MixedInfOne,
    SingularGram,
    Stream,
    best_k_term_error,
    check_normalized,
    dual_norm,
    gram_solve,
    induced_norm_inf_to_1,
    matrix_from_csv,
    matrix_from_json,
    matrix_to_csv,
    matrix_to_json,
    negative_part,
    norm,
    numerical_rank,
    positive_part,
    symmetric_eigs,
    top_k_indices,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vectors = st.integers(1, 7).flatmap(lambda n: arrays(float, n, elements=finite))
specs = st.one_of(st.sampled_from([Lp(1.0), Lp(2.0), Lp(3.0), Lp(1.5), Lp(math.inf)]),
                  st.floats(0, 1).map(MixedInfOne))


@pytest.mark.parametrize("v, spec, expected", [
    ((3, -4), Lp(2), 5.0),
    ((3, -4), MixedInfOne(0.5), 5.5),
    ((1, 1, 1), Lp(math.inf), 1.0),
])
def test_norm_examples(v, spec, expected):
    assert norm(v, spec) == pytest.approx(expected, abs=1e-12)


def test_dual_norm_examples():
    assert dual_norm([1, 1], Lp(1)) == pytest.approx(1.0)
    assert dual_norm([3, -4], Lp(2)) == pytest.approx(5.0)


def test_mixed_dual_matches_vertex_oracle(rng):
    # the dual of a polyhedral norm is the max of <v, x> over the vertices of its unit ball,
    # which are the points s * e_S / phi(e_S) for sign vectors s and supports S
    for _ in range(30):
        q = int(rng.integers(1, 5))
        alpha = float(rng.uniform())
        v = rng.standard_normal(q)
        best = 0.0
        for size in range(1, q + 1):
            for S in itertools.combinations(range(q), size):
                for signs in itertools.product((1.0, -1.0), repeat=size):
                    x = np.zeros(q)
                    x[list(S)] = signs
                    best = max(best, v @ x / norm(x, MixedInfOne(alpha)))
        assert dual_norm(v, MixedInfOne(alpha)) == pytest.approx(best, rel=1e-7, abs=1e-9)


@given(specs, st.integers(0, 10_000))
def test_holder_inequality(spec, seed):
    r = np.random.default_rng(seed)
    for _ in range(25):
        v, u = r.standard_normal(4), r.standard_normal(4)
        assert v @ u <= norm(v, spec) * dual_norm(u, spec) + 1e-9


@given(vectors, specs, st.floats(-5, 5))
def test_norm_axioms(v, spec, t):
    assert norm(v, spec) >= 0
    assert norm(t * v, spec) == pytest.approx(abs(t) * norm(v, spec), rel=1e-9, abs=1e-9)


@given(specs)
def test_norms_are_normalized(spec):
    check_normalized(spec, dim=4)


@pytest.mark.parametrize("Q, expected", [
    (np.eye(2), 2.0),
    (np.array([[1.0, 2.0], [3.0, 4.0]]), 10.0),
    (np.array([[1.0, 1.0]]), 2.0),
])
def test_induced_norm_examples(Q, expected):
    assert induced_norm_inf_to_1(Q) == pytest.approx(expected)


def test_induced_norm_against_naive_enumeration(rng):
    for _ in range(20):
        Q = rng.standard_normal((int(rng.integers(1, 5)), int(rng.integers(1, 9))))
        naive = max(np.abs(Q @ np.array(s)).sum() for s in itertools.product((1.0, -1.0), repeat=Q.shape[1]))
        assert induced_norm_inf_to_1(Q) == pytest.approx(naive, rel=1e-12)


def test_induced_norm_column_cap():
    with pytest.raises(ColumnLimitExceeded):
        induced_norm_inf_to_1(np.ones((1, 25)))


def test_best_k_term_examples():
    assert best_k_term_error([3, -1, 2], 1) == pytest.approx(3.0)
    x = np.array([1.5, -2.0, 0.25])
    assert best_k_term_error(x, 0) == pytest.approx(np.abs(x).sum())
    assert best_k_term_error(x, 3) == 0.0
    assert best_k_term_error(x, 10) == 0.0


@given(vectors, st.integers(0, 8))
def test_best_k_term_properties(x, k):
    err = best_k_term_error(x, k)
    assert 0.0 <= err <= np.abs(x).sum() + 1e-9
    assert best_k_term_error(x, k + 1) <= err + 1e-12
    # the kept entries are the largest ones
    keep = top_k_indices(x, k)
    rest = np.delete(np.abs(x), keep)
    if keep.size and rest.size:
        assert np.abs(x)[keep].min() >= rest.max()


@given(vectors)
def test_signed_parts(x):
    assert np.allclose(positive_part(x) + negative_part(x), x)
    assert np.all(negative_part(x) <= 0) and np.all(positive_part(x) >= 0)


def test_rank_examples(rng):
    assert numerical_rank(np.eye(3)) == 3
    assert numerical_rank([[1, 2], [2, 4]]) == 1
    assert numerical_rank(rng.standard_normal((4, 8))) == 4


def test_gram_solve(rng):
    Q = rng.standard_normal((3, 6))
    b = rng.standard_normal(3)
    assert np.allclose(Q @ Q.T @ gram_solve(Q, b), b)
    with pytest.raises(SingularGram):
        gram_solve([[1, 2], [2, 4]], [1, 1])


@pytest.mark.parametrize("Q, expected", [
    (np.eye(2), [1, 1]),
    (np.diag([2.0, 3.0]), [2, 3]),
    (np.array([[0.0, 1.0], [1.0, 0.0]]), [-1, 1]),
])
def test_eig_examples(Q, expected):
    assert np.allclose(symmetric_eigs(Q), expected)


@given(st.integers(1, 8), st.integers(0, 10_000))
def test_jacobi_matches_lapack(n, seed):
    X = np.random.default_rng(seed).standard_normal((n, n))
    S = X + X.T
    assert np.allclose(symmetric_eigs(S), np.linalg.eigvalsh(S), atol=1e-9)


def test_text_round_trips(rng):
    Q = rng.standard_normal((3, 4)) * 10.0 ** rng.integers(-8, 8, (3, 4))
    assert np.array_equal(matrix_from_csv(matrix_to_csv(Q)), Q)
    assert np.array_equal(matrix_from_json(matrix_to_json(Q)), Q)


def test_stream_is_reproducible_and_keyed():
    a, b = Stream(42).normal((3, 3)), Stream(42).normal((3, 3))
    assert np.array_equal(a, b)
    assert not np.array_equal(Stream(42, 1).normal(5), Stream(42, 2).normal(5))
    u = Stream(7).uniform(10_000)
    assert u.min() > 0 and u.max() < 1


def test_stream_box_muller_moments():
    z = Stream(3).normal(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1) < 0.01
