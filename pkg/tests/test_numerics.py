import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qieo_l0.numerics import ContractError, least_squares, restricted_least_squares, spectral_norm_sq

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_identity_solve():
    c, sse = least_squares(np.eye(3), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(c, [1, 2, 3])
    assert sse == pytest.approx(0, abs=1e-24)


def test_single_column_is_mean():
    c, sse = least_squares(np.ones((3, 1)), np.array([1.0, 2.0, 3.0]))
    assert c[0] == pytest.approx(2.0)
    assert sse == pytest.approx(2.0)


def test_duplicated_columns_min_norm():
    A = np.array([[1.0, 1.0], [2.0, 2.0], [0.5, 0.5]])
    y = np.array([1.0, 1.0, 2.0])
    c, _ = least_squares(A, y)
    # independent oracle: explicit pseudo-inverse
    ref = np.linalg.pinv(A) @ y
    np.testing.assert_allclose(c, ref, rtol=1e-12)
    # every exact minimizer is ref + t * (1, -1); min norm is at t = 0
    for t in (-1.0, -0.1, 0.3, 2.0):
        other = ref + t * np.array([1.0, -1.0])
        assert np.linalg.norm(c) <= np.linalg.norm(other) + 1e-15


def test_zero_matrix():
    c, sse = least_squares(np.zeros((4, 2)), np.array([1.0, 2.0, 0.0, 2.0]))
    np.testing.assert_array_equal(c, 0)
    assert sse == 9.0


def test_dimension_mismatch():
    with pytest.raises(ContractError):
        least_squares(np.eye(3), np.ones(4))


def test_non_finite_rejected():
    with pytest.raises(ContractError):
        least_squares(np.array([[np.nan]]), np.ones(1))


def test_restricted_identity():
    fit = restricted_least_squares(np.eye(4), np.array([5.0, 6.0, 7.0, 8.0]), [2, 0])
    np.testing.assert_allclose(fit.weights, [5, 0, 7, 0])
    assert fit.sse == pytest.approx(100.0)
    assert fit.support.tolist() == [0, 2]


def test_restricted_empty_support():
    y = np.array([1.0, -2.0, 2.0])
    fit = restricted_least_squares(np.ones((3, 2)), y, [])
    np.testing.assert_array_equal(fit.weights, 0)
    assert fit.sse == 9.0


def test_restricted_out_of_range():
    with pytest.raises(ContractError):
        restricted_least_squares(np.eye(3), np.ones(3), [0, 3])
    with pytest.raises(ContractError):
        restricted_least_squares(np.eye(3), np.ones(3), [-1])


def test_restricted_residual_orthogonal(rng):
    X = rng.standard_normal((6, 4))
    y = rng.standard_normal(6)
    fit = restricted_least_squares(X, y, [1, 3])
    g = np.abs(X[:, [1, 3]].T @ (y - X @ fit.weights)).max()
    assert g <= 1e-8 * np.linalg.norm(X, 2) * np.linalg.norm(y)
    assert fit.weights[0] == 0 and fit.weights[2] == 0


@pytest.mark.parametrize(
    "X, expected",
    [
        (2 * np.eye(3), 4.0),
        (np.array([[1.0, 0.0], [0.0, 3.0]]), 9.0),
        # (3 + sqrt 5) / 2 from the Gram matrix characteristic polynomial
        (np.array([[1.0, 1.0], [0.0, 1.0]]), 2.618033988749895),
        (np.zeros((3, 2)), 0.0),
    ],
)
def test_spectral_norm_examples(X, expected):
    assert spectral_norm_sq(X) == pytest.approx(expected, rel=1e-9, abs=1e-300)


def test_spectral_norm_start_in_null_space():
    # all-ones start is orthogonal to the top singular vector here
    X = np.array([[1.0, -1.0], [0.0, 0.0]])
    assert spectral_norm_sq(X) == pytest.approx(2.0, rel=1e-9)


def test_spectral_norm_against_svd(rng):
    for _ in range(10):
        X = rng.standard_normal((rng.integers(2, 30), rng.integers(2, 30)))
        ref = np.linalg.svd(X, compute_uv=False)[0] ** 2
        assert spectral_norm_sq(X) == pytest.approx(ref, rel=1e-6)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (7, 5), elements=finite), arrays(np.float64, 7, elements=finite), st.data())
def test_adding_index_never_increases_sse(X, y, data):
    S = data.draw(st.lists(st.integers(0, 4), unique=True, max_size=4))
    extra = data.draw(st.integers(0, 4).filter(lambda j: j not in S))
    a = restricted_least_squares(X, y, S).sse
    b = restricted_least_squares(X, y, S + [extra]).sse
    assert b <= a * (1 + 1e-9) + 1e-9


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (8, 5), elements=finite), arrays(np.float64, 8, elements=finite), st.data())
def test_residual_orthogonality_property(X, y, data):
    S = data.draw(st.lists(st.integers(0, 4), unique=True))
    fit = restricted_least_squares(X, y, S)
    assert fit.sse >= 0
    off = np.setdiff1d(np.arange(5), S)
    assert np.all(fit.weights[off] == 0)
    if S:
        g = np.abs(X[:, sorted(S)].T @ (y - X @ fit.weights)).max()
        assert g <= 1e-8 * max(1.0, np.linalg.norm(X) * np.abs(y).max())


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (6, 4), elements=finite), arrays(np.float64, 4, elements=finite))
def test_rayleigh_bound(X, v):
    if np.linalg.norm(v) == 0:
        return
    lam = spectral_norm_sq(X)
    q = np.linalg.norm(X @ v) ** 2 / np.linalg.norm(v) ** 2
    assert lam >= q * (1 - 1e-7) - 1e-12
    assert math.isfinite(lam)
