"""Deterministic algebraic Riccati equation with coupling term.

Solves

    A^* P + P A + W - (B^* P + V)^* R^{-1} (B^* P + V) = 0

for the stabilizing (or almost-stabilizing) Hermitian solution.  Stage one
extracts the stable invariant subspace of the associated Hamiltonian
matrix; stage two polishes the solution with Newton-Kleinman iterations,
each of which solves one closed-loop Lyapunov equation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import IterationError, SolveError, StabilizationError, SubspaceError
from .frequency import CostWeight
from .linmat import hermitian_part, solve_lyapunov
from .stability import LinearPlant, is_stabilizable_det, spectral_abscissa

__all__ = [
    "RiccatiReport",
    "are_residual",
    "solve_are",
    "newton_kleinman",
]

log = logging.getLogger(__name__)

#: closed-loop abscissa below which a solution counts as stabilizing
STABILIZING_TOL = 1e-9

#: closed-loop abscissa up to which a solution counts as almost-stabilizing
ALMOST_TOL = 1e-7

#: Newton refinement target residual
NEWTON_TOL = 1e-11

#: grouping width for imaginary-axis Hamiltonian eigenvalues
_AXIS_CLUSTER = 1e-6


@dataclass(frozen=True)
class RiccatiReport:
    """Outcome of a Riccati solve.

    Attributes
    ----------
    P : numpy.ndarray or None
        Hermitian solution; ``None`` when classification is ``no_solution``.
    residual : float
        Frobenius norm of the Riccati operator at ``P`` (``nan`` without P).
    closed_loop_measure : float
        Spectral abscissa of the closed loop ``A - B R^{-1} (B^* P + V)``
        (``nan`` without P).
    classification : str
        One of ``stabilizing``, ``almost_stabilizing``, ``non_stabilizing``,
        ``no_solution``.
    """

    P: np.ndarray | None
    residual: float
    closed_loop_measure: float
    classification: str


def are_residual(plant: LinearPlant, M: CostWeight, P) -> float:
    """Frobenius norm of the Riccati operator evaluated at ``P``."""
    A, B = plant.A, plant.B
    P = hermitian_part(P)
    coupling = B.conj().T @ P + M.V
    quad = coupling.conj().T @ np.linalg.solve(M.R, coupling)
    return float(np.linalg.norm(A.conj().T @ P + P @ A + M.W - quad, "fro"))


def _closed_loop(plant: LinearPlant, M: CostWeight, P: np.ndarray) -> np.ndarray:
    gain = np.linalg.solve(M.R, plant.B.conj().T @ P + M.V)
    return plant.A - plant.B @ gain


def _report(plant: LinearPlant, M: CostWeight, P: np.ndarray) -> RiccatiReport:
    """Classify a candidate solution by its closed-loop abscissa."""
    measure = spectral_abscissa(_closed_loop(plant, M, P))
    if measure < -STABILIZING_TOL:
        classification = "stabilizing"
    elif measure <= ALMOST_TOL:
        classification = "almost_stabilizing"
    else:
        classification = "non_stabilizing"
    return RiccatiReport(
        P=P,
        residual=are_residual(plant, M, P),
        closed_loop_measure=float(measure),
        classification=classification,
    )


def _no_solution() -> RiccatiReport:
    return RiccatiReport(
        P=None, residual=float("nan"), closed_loop_measure=float("nan"),
        classification="no_solution",
    )


def _hamiltonian(plant: LinearPlant, M: CostWeight) -> np.ndarray:
    """Hamiltonian of the reduced (cross-term free) problem."""
    A, B = plant.A, plant.B
    RinvV = np.linalg.solve(M.R, M.V)
    At = A - B @ RinvV
    G = B @ np.linalg.solve(M.R, B.conj().T)
    Wt = hermitian_part(M.W - M.V.conj().T @ RinvV)
    top = np.hstack([At, -G])
    bot = np.hstack([-Wt, -At.conj().T])
    return np.vstack([top, bot])


def _graph_solution(vectors: np.ndarray, n: int) -> np.ndarray:
    """Recover ``P = X2 X1^{-1}`` from a basis stacked as ``[X1; X2]``."""
    X1 = vectors[:n, :]
    X2 = vectors[n:, :]
    sv = np.linalg.svd(X1, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
        raise SubspaceError("invariant subspace is not a graph (X1 singular)")
    return hermitian_part(X2 @ np.linalg.inv(X1))


def _axis_basis(values: np.ndarray, vectors: np.ndarray, indices: list[int]) -> np.ndarray:
    """Basis of the eigenvector span of imaginary-axis eigenvalue clusters.

    Axis eigenvalues of a Hamiltonian matrix come in coincident pairs that
    often share a single eigenvector (Jordan structure), so each cluster
    contributes only the numerical rank of its eigenvector bundle.
    """
    remaining = sorted(indices, key=lambda i: values[i].imag)
    columns = []
    while remaining:
        head = remaining[0]
        cluster = [i for i in remaining if abs(values[i] - values[head]) <= _AXIS_CLUSTER]
        remaining = [i for i in remaining if i not in cluster]
        bundle = vectors[:, cluster]
        U, sv, _ = np.linalg.svd(bundle, full_matrices=False)
        rank = int(np.sum(sv > 1e-8 * max(sv[0], 1e-300)))
        columns.append(U[:, :rank])
    if not columns:
        return np.zeros((vectors.shape[0], 0), dtype=complex)
    return np.hstack(columns)


def solve_are(plant: LinearPlant, M: CostWeight) -> RiccatiReport:
    """Solve the Riccati equation and classify the solution.

    Requires a stabilizable plant.  When the Hamiltonian has exactly ``n``
    stable eigenvalues the stabilizing solution is extracted and refined
    by :func:`newton_kleinman` down to a residual of 1e-11.  With
    eigenvalues on the imaginary axis an almost-stabilizing solution is
    attempted from the stable eigenvectors plus one representative per
    axis cluster; if no such graph exists the report says ``no_solution``.
    """
    if M.n != plant.n or M.m != plant.m:
        raise SolveError("cost weight does not match plant dimensions")
    if not is_stabilizable_det(plant):
        raise StabilizationError("plant is not stabilizable")

    H = _hamiltonian(plant, M)
    values, vectors = np.linalg.eig(H)
    n = plant.n
    stable = [i for i in range(2 * n) if values[i].real < -STABILIZING_TOL]
    axis = [i for i in range(2 * n) if abs(values[i].real) <= STABILIZING_TOL]

    if len(stable) == n:
        P0 = _graph_solution(vectors[:, stable], n)
        gain0 = np.linalg.solve(M.R, plant.B.conj().T @ P0 + M.V)
        if spectral_abscissa(plant.A - plant.B @ gain0) < 0.0:
            try:
                return newton_kleinman(plant, M, -gain0)
            except (IterationError, SolveError):
                log.debug("solve_are: Newton refinement failed, keeping stage-1 P")
        return _report(plant, M, P0)

    # boundary case: not exactly n stable directions
    log.info(
        "solve_are: Hamiltonian defect (stable count %d of %d), trying "
        "almost-stabilizing subspace", len(stable), n,
    )
    basis = np.hstack([vectors[:, stable], _axis_basis(values, vectors, axis)])
    if basis.shape[1] != n:
        return _no_solution()
    try:
        P = _graph_solution(basis, n)
    except SubspaceError:
        return _no_solution()
    report = _report(plant, M, P)
    if report.classification == "non_stabilizing":
        return _no_solution()
    scale = np.linalg.norm(plant.A) * max(np.linalg.norm(P), 1.0) + np.linalg.norm(M.W)
    if report.residual > 1e-6 * max(scale, 1.0):
        return _no_solution()
    return report


def newton_kleinman(
    plant: LinearPlant,
    M: CostWeight,
    F0,
    max_iter: int = 50,
    tol: float = NEWTON_TOL,
) -> RiccatiReport:
    """Newton-Kleinman iteration from a stabilizing feedback ``F0``.

    Each step solves the closed-loop Lyapunov equation

        (A + B F)^* P + P (A + B F) + W + V^* F + F^* V + F^* R F = 0

    and updates ``F = -R^{-1} (B^* P + V)``.  Residuals decrease
    monotonically after the first step; iteration stops at ``tol`` or
    after ``max_iter`` rounds, whichever comes first.

    Raises
    ------
    IterationError
        If ``F0`` is not stabilizing, or an update leaves the stabilizing
        set (the Lyapunov solve loses its spectral gap).
    """
    A, B = plant.A, plant.B
    F = np.asarray(F0, dtype=complex)
    if F.shape != (plant.m, plant.n):
        raise SolveError(f"F0 must be {plant.m}x{plant.n}, got {F.shape}")
    if spectral_abscissa(A + B @ F) >= 0.0:
        raise IterationError("initial feedback is not stabilizing")

    best: RiccatiReport | None = None
    for k in range(max_iter):
        closed = A + B @ F
        Q = hermitian_part(
            M.W + M.V.conj().T @ F + F.conj().T @ M.V + F.conj().T @ M.R @ F
        )
        try:
            P = solve_lyapunov(closed, Q)
        except SolveError as exc:
            raise IterationError(f"iteration left stabilizing set: {exc}") from exc
        report = _report(plant, M, P)
        if best is None or report.residual < best.residual:
            best = report
        if report.residual <= tol:
            log.debug("newton_kleinman converged in %d iterations", k + 1)
            return report
        F = -np.linalg.solve(M.R, B.conj().T @ P + M.V)
        if spectral_abscissa(A + B @ F) >= 0.0:
            raise IterationError("iteration left stabilizing set")
    return best
