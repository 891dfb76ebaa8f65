"""Plant containers and stability / stabilizability tests.

Deterministic plants are pairs ``(A, B)`` for ``x' = A x + B u``; stochastic
plants are triples ``(A, N, B)`` for the Ito system
``dx = (A x + B u) dt + N x dw`` driven by a scalar Wiener process.

Mean-square stability of ``(A, N)`` is decided through the spectrum of the
n^2 x n^2 Kronecker lift of the second-moment flow ``P -> A P + P A^* +
N P N^*``; the pair is stable exactly when that lift is Hurwitz.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, StabilizationError
from .linmat import as_matrix, pinv, solve_lyapunov

__all__ = [
    "LinearPlant",
    "StochPlant",
    "spectral_abscissa",
    "ms_lift",
    "ms_abscissa",
    "is_stabilizable_det",
    "stabilize_det",
    "certify_stabilizable_stoch",
]

log = logging.getLogger(__name__)

#: rank tolerance of the Hautus test, relative to the largest singular value
HAUTUS_RTOL = 1e-9


@dataclass(frozen=True)
class LinearPlant:
    """Deterministic plant ``x' = A x + B u``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", as_matrix(self.A, "A", square=True))
        object.__setattr__(self, "B", as_matrix(self.B, "B"))
        if self.B.shape[0] != self.A.shape[0]:
            raise DimensionError(
                f"B must have {self.A.shape[0]} rows, got {self.B.shape}"
            )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class StochPlant:
    """Ito plant ``dx = (A x + B u) dt + N x dw`` with scalar noise."""

    A: np.ndarray
    N: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", as_matrix(self.A, "A", square=True))
        object.__setattr__(self, "N", as_matrix(self.N, "N", square=True))
        object.__setattr__(self, "B", as_matrix(self.B, "B"))
        n = self.A.shape[0]
        if self.N.shape[0] != n:
            raise DimensionError(f"N must be {n}x{n}, got {self.N.shape}")
        if self.B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {self.B.shape}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def deterministic(self) -> LinearPlant:
        """Drop the noise channel."""
        return LinearPlant(self.A, self.B)


def spectral_abscissa(A) -> float:
    """Largest real part of the eigenvalues of ``A``."""
    A = as_matrix(A, "A", square=True)
    return float(np.max(np.linalg.eigvals(A).real))


def ms_lift(A, N) -> np.ndarray:
    """Kronecker lift of the second-moment flow of ``(A, N)``.

    Returns the n^2 x n^2 matrix ``L`` with
    ``L vec(P) = vec(A P + P A^* + N P N^*)`` under column-major ``vec``.
    """
    A = as_matrix(A, "A", square=True)
    N = as_matrix(N, "N", square=True)
    if N.shape[0] != A.shape[0]:
        raise DimensionError("A and N must have equal size")
    eye = np.eye(A.shape[0])
    return np.kron(eye, A) + np.kron(A.conj(), eye) + np.kron(N.conj(), N)


def ms_abscissa(A, N) -> float:
    """Spectral abscissa of the mean-square lift of ``(A, N)``.

    Negative exactly when the uncontrolled Ito system is mean-square
    stable.  With ``N = 0`` this equals twice the spectral abscissa
    of ``A``.
    """
    return spectral_abscissa(ms_lift(A, N))


def is_stabilizable_det(plant: LinearPlant) -> bool:
    """Hautus stabilizability test for ``(A, B)``.

    Checks ``rank [lambda I - A, B] = n`` for every eigenvalue with
    nonnegative real part.  Rank is decided by singular values relative
    to ``1e-9 * sigma_max``.  Eigenvalues within that band of the axis
    are tested as well, which keeps the answer conservative under
    eigenvalue roundoff.
    """
    A, B = plant.A, plant.B
    n = plant.n
    for lam in np.linalg.eigvals(A):
        if lam.real < -HAUTUS_RTOL:
            continue
        pencil = np.hstack([lam * np.eye(n) - A, B])
        sv = np.linalg.svd(pencil, compute_uv=False)
        if sv[-1] <= HAUTUS_RTOL * sv[0]:
            return False
    return True


def stabilize_det(plant: LinearPlant, max_retries: int = 8) -> np.ndarray:
    """Construct a feedback ``F`` with ``A + B F`` Hurwitz (Bass method).

    With ``beta = ||A||_F + 1`` the Lyapunov equation
    ``(A + beta I) X + X (A + beta I)^* = 2 B B^*`` is solved and
    ``F = -B^* pinv(X)`` returned.  The closed loop is verified
    afterwards; on failure ``beta`` doubles, up to ``max_retries`` times.
    The pseudoinverse handles uncontrollable-but-stable directions, where
    ``X`` is singular.

    Raises
    ------
    StabilizationError
        If the plant is not stabilizable, or verification keeps failing.
    """
    A, B = plant.A, plant.B
    if not is_stabilizable_det(plant):
        raise StabilizationError("plant is not stabilizable")
    beta = float(np.linalg.norm(A, "fro")) + 1.0
    for attempt in range(max_retries):
        shifted = A + beta * np.eye(plant.n)
        # solve_lyapunov expects A_l^* X + X A_l + Q = 0 with A_l = shifted^*
        X = solve_lyapunov(shifted.conj().T, -2.0 * B @ B.conj().T)
        F = -B.conj().T @ pinv(X)
        if spectral_abscissa(A + B @ F) < 0.0:
            if attempt:
                log.debug("stabilize_det succeeded after %d beta doublings", attempt)
            return F
        beta *= 2.0
    raise StabilizationError("stabilization failed: Bass iteration exhausted retries")


def certify_stabilizable_stoch(plant: StochPlant):
    """Try to certify mean-square stabilizability of ``(A, N, B)``.

    Returns an MS-stabilizing feedback ``F`` (``ms_abscissa(A + B F, N) < 0``)
    or ``None`` when no certificate was found.  The test is sound but not
    complete: first ``F = 0`` is checked, then the feedback from the
    definite-cost stochastic Riccati equation with unit weight, reached by
    a homotopy in the noise intensity.
    """
    if ms_abscissa(plant.A, plant.N) < 0.0:
        return np.zeros((plant.m, plant.n), dtype=complex)
    # local import: stoch_lq depends on this module for plants and lifts
    from .stoch_lq import _wonham_homotopy

    result = _wonham_homotopy(plant.A, plant.N, plant.B, np.eye(plant.n, dtype=complex))
    if result is None:
        return None
    _, F = result
    if ms_abscissa(plant.A + plant.B @ F, plant.N) < 0.0:
        return F
    return None
