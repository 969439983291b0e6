import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mbsvrn.errors import NotPositiveDefiniteError
from mbsvrn.linalg import factorize, fingerprint, solve


def gaussian_elimination(M, r):
    """Partial-pivot elimination with back substitution; shares no code with LAPACK."""
    A = np.array(M, dtype=np.float64)
    x = np.array(r, dtype=np.float64)
    d = A.shape[0]
    for k in range(d):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        A[[k, p]], x[[k, p]] = A[[p, k]], x[[p, k]]
        f = A[k + 1:, k] / A[k, k]
        A[k + 1:, k:] -= np.outer(f, A[k, k:])
        x[k + 1:] -= f * x[k]
    y = np.zeros(d)
    for k in range(d - 1, -1, -1):
        y[k] = (x[k] - A[k, k + 1:] @ y[k + 1:]) / A[k, k]
    return y


def random_spd(rng, d):
    B = rng.standard_normal((d, d))
    return B.T @ B + np.eye(d)


def test_identity_and_diagonal():
    F = factorize(np.eye(3))
    np.testing.assert_array_equal(F.lower, np.eye(3))
    r = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(solve(F, r), r)
    D = factorize(np.diag([4.0, 9.0]))
    np.testing.assert_allclose(D.lower, np.diag([2.0, 3.0]))
    np.testing.assert_allclose(solve(D, np.array([4.0, 9.0])), [1.0, 1.0])


def test_random_spd_reconstruction_d16():
    M = random_spd(np.random.default_rng(0), 16)
    L = factorize(M).lower
    assert np.linalg.norm(L @ L.T - M) / np.linalg.norm(M) <= 1e-12


def test_solve_matches_elimination_oracle():
    rng = np.random.default_rng(1)
    for d in (2, 16, 64):
        M = random_spd(rng, d)
        r = rng.standard_normal(d)
        y = solve(factorize(M), r)
        ref = gaussian_elimination(M, r)
        assert np.linalg.norm(y - ref) <= 1e-9 * np.linalg.norm(ref)


@pytest.mark.parametrize("d", [2, 16, 256])
def test_hundred_random_matrices(d):
    rng = np.random.default_rng(d)
    for _ in range(100):
        M = random_spd(rng, d)
        F = factorize(M)
        L = F.lower
        assert np.all(np.diag(L) > 0)
        assert np.linalg.norm(L @ L.T - M) / np.linalg.norm(M) <= 1e-10
        r = rng.standard_normal(d)
        y = solve(F, r)
        assert np.linalg.norm(M @ y - r) <= 1e-10 * (1 + np.linalg.norm(r)) * np.linalg.cond(M)


def test_not_positive_definite():
    with pytest.raises(NotPositiveDefiniteError, match="matrix not positive definite"):
        factorize(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NotPositiveDefiniteError):
        factorize(np.zeros((2, 2)))


def test_rejects_asymmetric_and_mismatch():
    with pytest.raises(ValueError):
        factorize(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        solve(factorize(np.eye(2)), np.ones(3))


def test_fingerprint_tracks_input():
    M = random_spd(np.random.default_rng(2), 4)
    F = factorize(M)
    assert F.source_fingerprint == fingerprint(M)
    M2 = M.copy()
    M2[0, 0] += 1e-9
    assert fingerprint(M2) != F.source_fingerprint


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 12))
def test_solve_property(seed, d):
    rng = np.random.default_rng(seed)
    M = random_spd(rng, d)
    r = rng.standard_normal(d)
    y = factorize(M).solve(r)
    np.testing.assert_allclose(y, gaussian_elimination(M, r), rtol=1e-8, atol=1e-12)
