"""Dense linear-algebra helpers: Lyapunov solves, exponentials, Gramians."""

import numpy as np
import pytest

from kypcert import (
    DimensionError,
    SolveError,
    finite_gramian,
    hermitian_part,
    matexp,
    pinv,
    solve_glyap,
    solve_lyapunov,
)
from kypcert.linmat import as_matrix


def test_as_matrix_validates_shape_and_finiteness():
    with pytest.raises(DimensionError):
        as_matrix([[1.0, 2.0]], "A", square=True)
    with pytest.raises(ValueError):
        as_matrix([[np.nan]], "A", square=True)
    out = as_matrix([[1, 2], [3, 4]], "A", square=True)
    assert out.dtype == complex and out.shape == (2, 2)


def test_hermitian_part_is_projection():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    H = hermitian_part(X)
    assert np.allclose(H, H.conj().T)
    assert np.allclose(hermitian_part(H), H)


def test_solve_lyapunov_scalar_value():
    # a^* p + p a + q = 0 with a = -1, q = 2 gives p = 1
    P = solve_lyapunov(np.array([[-1.0]]), np.array([[2.0]]))
    assert abs(P[0, 0] - 1.0) < 1e-14


def test_solve_lyapunov_random_residual():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(1, 6))
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        A = A - (np.max(np.linalg.eigvals(A).real) + 0.5) * np.eye(n)
        Q = rng.standard_normal((n, n))
        Q = Q + Q.T
        P = solve_lyapunov(A, Q)
        res = A.conj().T @ P + P @ A + Q
        assert np.linalg.norm(res) <= 1e-9 * max(1.0, np.linalg.norm(Q))
        assert np.allclose(P, P.conj().T)


def test_solve_lyapunov_singular_operator_raises():
    # a = 0 makes the Lyapunov operator singular for q != 0
    with pytest.raises(SolveError):
        solve_lyapunov(np.array([[0.0]]), np.array([[1.0]]))


def test_solve_glyap_scalar_value():
    # 2 a p + |n|^2 p + q = 0 with a = -1, n = 1: p = q
    P = solve_glyap(np.array([[-1.0]]), np.array([[1.0]]), np.array([[0.7]]))
    assert abs(P[0, 0] - 0.7) < 1e-14


def test_solve_glyap_matrix_residual():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = int(rng.integers(1, 4))
        A = rng.standard_normal((n, n)) - 3.0 * np.eye(n)
        N = 0.4 * rng.standard_normal((n, n))
        Q = rng.standard_normal((n, n))
        Q = Q + Q.T
        P = solve_glyap(A, N, Q)
        res = A.conj().T @ P + P @ A + N.conj().T @ P @ N + Q
        assert np.linalg.norm(res) <= 1e-9 * max(1.0, np.linalg.norm(Q))


def test_matexp_matches_rotation():
    A = np.array([[0.0, -1.0], [1.0, 0.0]])
    E = matexp(A, np.pi / 2)
    assert np.allclose(E, [[0.0, -1.0], [1.0, 0.0]], atol=1e-12)


def test_finite_gramian_scalar_closed_form():
    # int_0^1 e^{2 a t} b^2 dt = (1 - e^{-2}) / 2 for a = -1, b = 1
    G = finite_gramian(np.array([[-1.0]]), np.array([[1.0]]), 1.0)
    assert abs(G[0, 0] - (1.0 - np.exp(-2.0)) / 2.0) < 1e-10


def test_finite_gramian_derivative_identity():
    # d/dT G(T) = e^{AT} B B^* e^{A^*T}
    rng = np.random.default_rng(9)
    A = rng.standard_normal((3, 3)) - 2.0 * np.eye(3)
    B = rng.standard_normal((3, 2))
    T, h = 1.3, 1e-5
    lhs = (finite_gramian(A, B, T + h) - finite_gramian(A, B, T - h)) / (2 * h)
    E = matexp(A, T)
    rhs = E @ B @ B.T @ E.T
    assert np.linalg.norm(lhs - rhs) < 1e-7


def test_pinv_moore_penrose_identities():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((4, 2)) @ rng.standard_normal((2, 4))
    Xp = pinv(X)
    assert np.allclose(X @ Xp @ X, X, atol=1e-10)
    assert np.allclose(Xp @ X @ Xp, Xp, atol=1e-10)
