"""Dense complex matrix kernel used by every solver in the package.

All routines work on ``numpy`` arrays promoted to ``complex128``.  The
problems this package targets are desk scale (state dimension a few dozen
at most), so Lyapunov-type equations are solved through the explicit
Kronecker lift with a dense LU factorization rather than a Schur-based
iteration; the lift is exact and its failure modes are easy to certify.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .exceptions import DimensionError, SolveError

__all__ = [
    "as_matrix",
    "hermitian_part",
    "solve_lyapunov",
    "solve_glyap",
    "matexp",
    "finite_gramian",
    "pinv",
]

#: relative residual accepted from a Lyapunov-type solve
LYAP_RESIDUAL_RTOL = 1e-10

#: singular values below ``PINV_RCOND * sigma_max`` are treated as zero
PINV_RCOND = 1e-12


def as_matrix(value, name: str = "matrix", square: bool = False) -> np.ndarray:
    """Validate and promote ``value`` to a 2-D complex128 array.

    Parameters
    ----------
    value : array_like
        Scalar, vector or matrix data.  Scalars become 1x1 matrices.
    name : str
        Label used in error messages.
    square : bool
        Require equal row and column counts.

    Returns
    -------
    numpy.ndarray
        C-contiguous complex copy of the input.
    """
    X = np.atleast_2d(np.asarray(value, dtype=complex))
    if X.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {X.shape}")
    if not np.all(np.isfinite(X.real)) or not np.all(np.isfinite(X.imag)):
        raise ValueError(f"{name} contains non-finite entries")
    if square and X.shape[0] != X.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {X.shape}")
    return np.ascontiguousarray(X)


def hermitian_part(X) -> np.ndarray:
    """Return ``(X + X^*) / 2``, the Hermitian part of a square matrix."""
    X = as_matrix(X, "X", square=True)
    return 0.5 * (X + X.conj().T)


def _solve_lifted(L: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve ``L vec(P) = -vec(Q)`` and verify the lifted residual.

    Column-major stacking is used throughout so that
    ``vec(A X B) = (B^T kron A) vec(X)``.
    """
    n = Q.shape[0]
    q = Q.flatten(order="F")
    try:
        p = np.linalg.solve(L, -q)
    except np.linalg.LinAlgError as exc:
        raise SolveError(f"no unique solution: lifted system is singular ({exc})") from exc
    if not np.all(np.isfinite(p.real)) or not np.all(np.isfinite(p.imag)):
        raise SolveError("no unique solution: lifted solve produced non-finite entries")
    resid = np.linalg.norm(L @ p + q)
    scale = np.linalg.norm(L) * np.linalg.norm(p) + np.linalg.norm(q)
    if resid > LYAP_RESIDUAL_RTOL * max(scale, 1e-300):
        raise SolveError(
            "no unique solution: lifted system is numerically singular "
            f"(residual {resid:.3e} exceeds tolerance)"
        )
    return p.reshape((n, n), order="F")


def solve_lyapunov(A, Q) -> np.ndarray:
    """Solve the continuous Lyapunov equation ``A^* P + P A + Q = 0``.

    Parameters
    ----------
    A, Q : array_like
        Square matrices of equal size.  ``Q`` is expected Hermitian; the
        returned ``P`` is symmetrized against roundoff.

    Returns
    -------
    numpy.ndarray
        The unique solution ``P``.

    Raises
    ------
    SolveError
        If ``sigma(A^*)`` and ``sigma(-A)`` intersect, which makes the
        lifted system singular and the solution non-unique.
    """
    A = as_matrix(A, "A", square=True)
    Q = as_matrix(Q, "Q", square=True)
    n = A.shape[0]
    if Q.shape[0] != n:
        raise DimensionError(f"Q must be {n}x{n}, got {Q.shape}")
    eye = np.eye(n)
    # vec(A^* P) = (I kron A^*) vec(P), vec(P A) = (A^T kron I) vec(P)
    L = np.kron(eye, A.conj().T) + np.kron(A.T, eye)
    P = _solve_lifted(L, Q)
    resid = np.linalg.norm(A.conj().T @ P + P @ A + Q)
    bound = LYAP_RESIDUAL_RTOL * (np.linalg.norm(A) * np.linalg.norm(P) + np.linalg.norm(Q))
    if resid > max(bound, 1e-300):
        raise SolveError(
            f"no unique solution: Lyapunov residual {resid:.3e} exceeds {bound:.3e}"
        )
    return hermitian_part(P)


def solve_glyap(A, N, Q) -> np.ndarray:
    """Solve the generalized Lyapunov equation ``A^* P + P A + N^* P N + Q = 0``.

    The noise term makes Schur-based solvers inapplicable, so the equation
    is solved through its n^2 x n^2 Kronecker lift
    ``I kron A^* + A^T kron I + N^T kron N^*``.

    Raises
    ------
    SolveError
        If the lifted operator is singular (the equation has no unique
        solution, e.g. the pair ``(A, N)`` sits on the mean-square
        stability boundary).
    """
    A = as_matrix(A, "A", square=True)
    N = as_matrix(N, "N", square=True)
    Q = as_matrix(Q, "Q", square=True)
    n = A.shape[0]
    if N.shape[0] != n or Q.shape[0] != n:
        raise DimensionError("A, N and Q must share one square size")
    eye = np.eye(n)
    L = np.kron(eye, A.conj().T) + np.kron(A.T, eye) + np.kron(N.T, N.conj().T)
    P = _solve_lifted(L, Q)
    resid = np.linalg.norm(A.conj().T @ P + P @ A + N.conj().T @ P @ N + Q)
    scale = (np.linalg.norm(A) + np.linalg.norm(N) ** 2) * np.linalg.norm(P) + np.linalg.norm(Q)
    if resid > max(LYAP_RESIDUAL_RTOL * scale, 1e-300):
        raise SolveError(
            f"no unique solution: generalized Lyapunov residual {resid:.3e} too large"
        )
    return hermitian_part(P)


def matexp(A, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``exp(A t)`` via scaling-and-squaring."""
    A = as_matrix(A, "A", square=True)
    return scipy.linalg.expm(A * t)


def finite_gramian(A, B, tau: float) -> np.ndarray:
    """Finite-horizon controllability Gramian ``int_0^tau e^{As} B B^* e^{A^*s} ds``.

    Composite Gauss-Legendre quadrature with panel doubling; the panel
    count doubles until two successive values agree to 1e-12 in the
    Frobenius norm (relative).  The result is symmetrized, so it is
    Hermitian positive semidefinite up to roundoff.

    Parameters
    ----------
    A : array_like, n x n
    B : array_like, n x m
    tau : float
        Horizon, must be positive.
    """
    A = as_matrix(A, "A", square=True)
    B = as_matrix(B, "B")
    n = A.shape[0]
    if B.shape[0] != n:
        raise DimensionError(f"B must have {n} rows, got {B.shape}")
    if not tau > 0:
        raise ValueError("tau must be positive")

    nodes, weights = np.polynomial.legendre.leggauss(8)

    def integral(panels: int) -> np.ndarray:
        h = tau / panels
        acc = np.zeros((n, n), dtype=complex)
        for p in range(panels):
            mid = (p + 0.5) * h
            for x, w in zip(nodes, weights):
                s = mid + 0.5 * h * x
                E = matexp(A, s) @ B
                acc += (0.5 * h * w) * (E @ E.conj().T)
        return acc

    panels = 64
    prev = integral(panels)
    for _ in range(8):
        panels *= 2
        cur = integral(panels)
        delta = np.linalg.norm(cur - prev) / max(np.linalg.norm(cur), 1e-300)
        if delta < 1e-12:
            return hermitian_part(cur)
        prev = cur
    return hermitian_part(prev)


def pinv(X) -> np.ndarray:
    """Moore-Penrose pseudoinverse with a fixed relative cutoff.

    Singular values below ``1e-12 * sigma_max`` are treated as exact
    zeros, which keeps Gramian pseudoinverses stable on uncontrollable
    directions.
    """
    X = as_matrix(X, "X")
    return np.linalg.pinv(X, rcond=PINV_RCOND)
