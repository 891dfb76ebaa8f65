"""Stochastic LQ certification for state-dependent multiplicative noise.

For the Ito plant ``dx = (A x + B u) dt + N x dw`` with normalized cost
``J(u) = E int (x^* W x + ||u||^2) dt`` the coercivity question

    J(0, u) >= eps^2 E ||x||^2_{L^2}   for all admissible u

is decided through the generalized algebraic Riccati equation

    A^* P + P A + N^* P N + W - P B B^* P = 0.

The constructive route splits ``W = W1 - W2`` into definite blocks,
solves the definite equation for ``P1 > 0`` (Newton iteration on
generalized Lyapunov equations), forms the closed loop
``A_cl = A - B B^* P1``, and settles the indefinite remainder by a
stochastic bounded-real margin: with ``W2 = C2^* C2`` the remainder
equation

    A_cl^* P2 + P2 A_cl + N^* P2 N - W2 - P2 B B^* P2 = 0

has a stabilizing solution ``P2 < 0`` exactly when the mean-square
L2-gain ``g`` from input to ``C2 x`` along the closed loop is below one,
and then ``P = P1 + P2`` solves the original equation (the cross terms
cancel algebraically).  The reported margin is ``eps = delta / gamma``
with ``delta = sqrt(1 - g^2)`` and ``gamma`` the input-to-state gain.

All gains are computed by bisection over ``gamma`` on the solvability of
``A^* S + S A + N^* S N + C^* C + gamma^{-2} S B B^* S = 0``, which in
the substitution ``P = -S`` is the same Newton iteration run with input
matrix ``B / gamma`` and state weight ``-C^* C``.

General input weights ``R`` and cross terms ``V`` reduce to this
normalized form by completing the square; see :func:`normalize_cost`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DimensionError,
    GainBracketError,
    IterationError,
    StabilizationError,
)
from .frequency import CostWeight
from .linmat import as_matrix, hermitian_part, solve_glyap
from .riccati_det import ALMOST_TOL, STABILIZING_TOL, RiccatiReport
from .stability import StochPlant, certify_stabilizable_stoch, ms_abscissa

__all__ = [
    "StochCoercivityReport",
    "split_weight",
    "solve_wonham",
    "solve_stoch_riccati",
    "stoch_riccati_residual",
    "brl_margin",
    "input_state_gain",
    "coercivity_stoch",
    "normalize_cost",
]

log = logging.getLogger(__name__)

#: Newton residual target for the generalized Riccati equations
NEWTON_TOL = 1e-11

#: relative width of the gain bisections
GAIN_RTOL = 1e-6

#: bracket for all gain bisections
GAIN_BRACKET = (1e-6, 1e6)

#: relative band around g = 1 inside which feasibility is not trusted
BRL_BAND = 1e-6


def split_weight(W, shift: float = 0.0):
    """Split a Hermitian ``W`` into definite blocks ``W = W1 - W2``.

    ``c = max(0, -lambda_min(W)) + 1 + shift``, ``W2 = c I`` and
    ``W1 = W + c I``, so both blocks are positive definite.  ``shift``
    displaces the split constant; the downstream verdicts must not
    depend on it.
    """
    W = hermitian_part(as_matrix(W, "W", square=True))
    if shift < 0:
        raise ValueError("shift must be nonnegative")
    lam_min = float(np.min(np.linalg.eigvalsh(W)))
    c = max(0.0, -lam_min) + 1.0 + float(shift)
    n = W.shape[0]
    return W + c * np.eye(n), c * np.eye(n, dtype=complex)


def stoch_riccati_residual(plant: StochPlant, W, P) -> float:
    """Frobenius residual of ``A^*P + PA + N^*PN + W - P B B^* P``."""
    W = hermitian_part(as_matrix(W, "W", square=True))
    P = hermitian_part(as_matrix(P, "P", square=True))
    A, N, B = plant.A, plant.N, plant.B
    R = A.conj().T @ P + P @ A + N.conj().T @ P @ N + W - P @ B @ B.conj().T @ P
    return float(np.linalg.norm(R))


def _residual_scale(A, N, B, W, P) -> float:
    nrm = np.linalg.norm
    return max(
        1.0,
        2.0 * nrm(A) * nrm(P) + nrm(N) ** 2 * nrm(P) + nrm(W) + nrm(B) ** 2 * nrm(P) ** 2,
    )


def _stoch_newton(A, N, B, W, F0, max_iter: int = 100, tol: float = NEWTON_TOL):
    """Newton iteration on the normalized generalized Riccati equation.

    Given a mean-square stabilizing ``F0``, each step solves the
    generalized Lyapunov equation of the closed loop ``A + B F`` with
    state weight ``W + F^* F`` and applies ``F <- -B^* P``.  Returns the
    pair ``(P, F)`` at the first iterate meeting the residual target.

    Raises
    ------
    IterationError
        If the initial feedback is not mean-square stabilizing, an
        iterate leaves the stabilizing set, the iterates blow up, or the
        residual target is not met within ``max_iter`` steps.
    """
    F = np.array(F0, dtype=complex)
    if ms_abscissa(A + B @ F, N) >= 0.0:
        raise IterationError("initial feedback is not mean-square stabilizing")
    blowup = 1e10 * (1.0 + np.linalg.norm(W))
    best = None
    for _ in range(max_iter):
        Q = hermitian_part(W + F.conj().T @ F)
        P = solve_glyap(A + B @ F, N, Q)
        if np.linalg.norm(P) > blowup:
            raise IterationError("Newton iterates diverged")
        res = np.linalg.norm(
            A.conj().T @ P + P @ A + N.conj().T @ P @ N + W
            - P @ B @ B.conj().T @ P
        )
        scale = _residual_scale(A, N, B, W, P)
        if best is None or res < best[2]:
            best = (P, F, res)
        if res <= tol * scale:
            return P, -B.conj().T @ P
        F = -B.conj().T @ P
        if ms_abscissa(A + B @ F, N) >= 0.0:
            raise IterationError("iteration left the mean-square stabilizing set")
    raise IterationError(
        f"no convergence in {max_iter} Newton steps (best residual {best[2]:.3e})"
    )


def _wonham_homotopy(A, N, B, W1, steps_cap: int = 40):
    """Mean-square stabilizing pair ``(P, F)`` by continuation in the noise.

    Starts from the deterministic plant (noise scaled to zero), where a
    spectral stabilizer is available, and walks the noise intensity up
    to one, re-solving the definite Riccati equation at each step so the
    feedback keeps a stabilization margin.  Returns ``None`` when the
    continuation stalls, which is evidence (not proof) that the pair is
    not mean-square stabilizable.
    """
    from .stability import LinearPlant, spectral_abscissa, stabilize_det

    if spectral_abscissa(A) < 0.0:
        F = np.zeros((B.shape[1], A.shape[0]), dtype=complex)
    else:
        try:
            F = stabilize_det(LinearPlant(A, B))
        except StabilizationError:
            return None

    theta = 0.0
    step = 1.0
    out = None
    for _ in range(steps_cap):
        target = min(1.0, theta + step)
        try:
            P, F_new = _stoch_newton(A, target * N, B, W1, F)
        except IterationError:
            step *= 0.5
            if step < 1e-4:
                return None
            continue
        F = F_new
        theta = target
        out = (P, F)
        if theta >= 1.0:
            return out
        step = min(2.0 * step, 1.0 - theta)
    return None


def _classify(measure: float) -> str:
    if measure < -STABILIZING_TOL:
        return "stabilizing"
    if measure <= ALMOST_TOL:
        return "almost_stabilizing"
    return "non_stabilizing"


def solve_wonham(plant: StochPlant, W1) -> RiccatiReport:
    """Stabilizing solution of the definite stochastic Riccati equation.

    ``W1`` must be Hermitian positive definite; the returned ``P`` solves
    ``A^*P + PA + N^*PN + W1 - P B B^* P = 0`` with mean-square stable
    closed loop ``A - B B^* P``.

    Raises
    ------
    StabilizationError
        If no mean-square stabilizing initial feedback is found.
    IterationError
        If the Newton iteration leaves the stabilizing set.
    """
    W1 = hermitian_part(as_matrix(W1, "W1", square=True))
    if W1.shape[0] != plant.n:
        raise DimensionError("W1 must match the state dimension")
    if np.min(np.linalg.eigvalsh(W1)) <= 0.0:
        raise ValueError("W1 not positive definite")
    F0 = certify_stabilizable_stoch(plant)
    if F0 is None:
        raise StabilizationError("no mean-square stabilizing feedback certified")
    P, _ = _stoch_newton(plant.A, plant.N, plant.B, W1, F0)
    measure = ms_abscissa(plant.A - plant.B @ plant.B.conj().T @ P, plant.N)
    report = RiccatiReport(
        P=P,
        residual=stoch_riccati_residual(plant, W1, P),
        closed_loop_measure=float(measure),
        classification=_classify(measure),
    )
    if report.classification != "stabilizing":
        raise IterationError(
            "definite Riccati solve ended outside the stabilizing set "
            f"(closed-loop measure {measure:.3e})"
        )
    return report


# ---------------------------------------------------------------------------
# mean-square L2 gains
# ---------------------------------------------------------------------------

def _gain_feasible(A, N, B, C, gamma: float):
    """Stabilizing solvability of the bounded-real Riccati at level gamma.

    Decides whether ``A^*S + SA + N^*SN + C^*C + gamma^{-2} S B B^* S = 0``
    has a stabilizing solution by running the Newton iteration on the
    substituted equation (input ``B / gamma``, weight ``-C^* C``) from
    the zero feedback.  Returns ``(True, P)`` with ``P = -S`` on success.
    """
    W = -hermitian_part(C.conj().T @ C)
    F0 = np.zeros((B.shape[1], A.shape[0]), dtype=complex)
    try:
        P, _ = _stoch_newton(A, N, B / gamma, W, F0, max_iter=200, tol=1e-12)
    except IterationError:
        return False, None
    return True, P


def _ms_l2_gain(A, N, B, C, rtol: float = GAIN_RTOL) -> float:
    """Mean-square L2-gain from input to ``C x`` by gain bisection."""
    if ms_abscissa(A, N) >= 0.0:
        raise StabilizationError("closed loop is not mean-square stable")
    if np.linalg.norm(B) == 0.0 or np.linalg.norm(C) == 0.0:
        return 0.0
    lo, hi = GAIN_BRACKET
    ok, _ = _gain_feasible(A, N, B, C, lo)
    if ok:
        return lo
    ok, _ = _gain_feasible(A, N, B, C, hi)
    if not ok:
        raise GainBracketError(
            f"gain exceeds the bisection bracket upper end {hi:g}", upper_bound=hi
        )
    while hi / lo > 1.0 + rtol:
        mid = math.sqrt(lo * hi)
        ok, _ = _gain_feasible(A, N, B, C, mid)
        if ok:
            hi = mid
        else:
            lo = mid
    return hi


def input_state_gain(A_cl, N, B) -> float:
    """Smallest mean-square input-to-state gain of a stable closed loop.

    Bisection (relative width 1e-6, bracket ``[1e-6, 1e6]``) on the
    stabilizing solvability of the bounded-real Riccati equation with
    unit state output.  ``B = 0`` returns exactly zero.

    Raises
    ------
    StabilizationError
        If ``(A_cl, N)`` is not mean-square stable.
    GainBracketError
        If the gain exceeds the bracket; the bound is attached.
    """
    A_cl = as_matrix(A_cl, "A_cl", square=True)
    N = as_matrix(N, "N", square=True)
    B = as_matrix(B, "B")
    return _ms_l2_gain(A_cl, N, B, np.eye(A_cl.shape[0], dtype=complex))


def brl_margin(A_cl, N, B, C2):
    """Bounded-real margin of the remainder equation along a closed loop.

    Feasibility of the indefinite remainder Riccati equation

        A_cl^* P2 + P2 A_cl + N^* P2 N - C2^* C2 - P2 B B^* P2 = 0

    with stabilizing ``P2 < 0`` is equivalent to the mean-square L2-gain
    ``g`` from input to ``C2 x`` being below one.  Returns
    ``(delta, P2)`` with ``delta = sqrt(1 - g^2)`` when ``g < 1`` and
    ``None`` otherwise.

    Raises
    ------
    StabilizationError
        If ``(A_cl, N)`` is not mean-square stable.
    """
    A_cl = as_matrix(A_cl, "A_cl", square=True)
    N = as_matrix(N, "N", square=True)
    B = as_matrix(B, "B")
    C2 = as_matrix(C2, "C2")
    g = _ms_l2_gain(A_cl, N, B, C2)
    if g >= 1.0:
        return None
    if g == 0.0:
        return 1.0, np.zeros_like(A_cl)
    ok, P2 = _gain_feasible(A_cl, N, B, C2, 1.0)
    if not ok:
        return None
    return float(math.sqrt(1.0 - g * g)), hermitian_part(P2)


# ---------------------------------------------------------------------------
# indefinite equation and the coercivity decision
# ---------------------------------------------------------------------------

def _no_solution() -> RiccatiReport:
    return RiccatiReport(
        P=None,
        residual=float("nan"),
        closed_loop_measure=float("nan"),
        classification="no_solution",
    )


def _full_report(plant: StochPlant, W, P) -> RiccatiReport:
    measure = ms_abscissa(plant.A - plant.B @ plant.B.conj().T @ P, plant.N)
    return RiccatiReport(
        P=hermitian_part(P),
        residual=stoch_riccati_residual(plant, W, P),
        closed_loop_measure=float(measure),
        classification=_classify(measure),
    )


def _compose_solution(plant: StochPlant, W, shift: float = 0.0):
    """Constructive ``P = P1 + P2`` route; None when the margin fails."""
    W1, W2 = split_weight(W, shift=shift)
    won = solve_wonham(plant, W1)
    P1 = won.P
    A_cl = plant.A - plant.B @ plant.B.conj().T @ P1
    C2 = np.linalg.cholesky(W2).conj().T
    g = _ms_l2_gain(A_cl, plant.N, plant.B, C2)
    if g >= 1.0 - BRL_BAND:
        return None, P1, A_cl, C2, g, W1, W2
    ok, P2 = _gain_feasible(A_cl, plant.N, plant.B, C2, 1.0)
    if not ok:
        return None, P1, A_cl, C2, g, W1, W2
    return hermitian_part(P2), P1, A_cl, C2, g, W1, W2


def solve_stoch_riccati(plant: StochPlant, W) -> RiccatiReport:
    """Stabilizing solution of the indefinite stochastic Riccati equation.

    Attempts the constructive split route (definite solve, then the
    bounded-real remainder along the closed loop, composed as
    ``P = P1 + P2``), then refines with Newton steps on the full
    equation.  When the split route is infeasible, direct Newton runs
    from 20 seeded randomized mean-square stabilizing feedbacks; if none
    converges to a stabilizing solution, ``no_solution`` is returned.

    Raises
    ------
    StabilizationError
        If mean-square stabilizability cannot be certified.
    """
    W = hermitian_part(as_matrix(W, "W", square=True))
    if W.shape[0] != plant.n:
        raise DimensionError("W must match the state dimension")
    F_cert = certify_stabilizable_stoch(plant)
    if F_cert is None:
        raise StabilizationError("no mean-square stabilizing feedback certified")

    P2, P1, A_cl, _, g, _, _ = _compose_solution(plant, W)
    if P2 is not None:
        P = hermitian_part(P1 + P2)
        try:
            P_ref, _ = _stoch_newton(
                plant.A, plant.N, plant.B, W, -plant.B.conj().T @ P
            )
            P = P_ref
        except IterationError:
            pass
        return _full_report(plant, W, P)

    log.info("solve_stoch_riccati: split route infeasible (g=%.6f), multi-start", g)
    A, N, B = plant.A, plant.N, plant.B
    n, m = plant.n, plant.m
    best = None
    for j in range(20):
        rng = np.random.default_rng(2020 + j)
        F = F_cert.copy()
        if j > 0:
            scale = 0.5 * (1.0 + np.linalg.norm(F_cert))
            for _ in range(50):
                trial = F_cert + scale * (
                    rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
                )
                if ms_abscissa(A + B @ trial, N) < 0.0:
                    F = trial
                    break
                scale *= 0.5
        try:
            P, _ = _stoch_newton(A, N, B, W, F)
        except IterationError:
            continue
        report = _full_report(plant, W, P)
        if report.classification == "stabilizing":
            if best is None or report.residual < best.residual:
                best = report
    return best if best is not None else _no_solution()


@dataclass(frozen=True)
class StochCoercivityReport:
    """Verdict and certificates of the stochastic coercivity decision.

    ``verdict`` is ``coercive``, ``not_coercive`` or ``not_certified``.
    For coercive instances ``stabilizing_P = P1 + P2`` solves the
    indefinite Riccati equation and ``eps = delta / gamma`` is the
    certified margin.  ``brl_gain`` records the bounded-real gain ``g``
    whose comparison against one decides feasibility.
    """

    stabilizing_P: np.ndarray | None
    P1: np.ndarray
    P2: np.ndarray | None
    W1: np.ndarray
    W2: np.ndarray
    delta: float | None
    gamma: float
    eps: float | None
    verdict: str
    brl_gain: float
    residual: float | None


def coercivity_stoch(plant: StochPlant, W, split_shift: float = 0.0) -> StochCoercivityReport:
    """Decide coercivity of the normalized stochastic cost.

    Runs the constructive chain: split ``W = W1 - W2``, definite solve
    for ``P1``, closed loop ``A_cl = A - B B^* P1``, bounded-real gain
    ``g`` of ``u -> C2 x`` with ``W2 = C2^* C2``, input-to-state gain
    ``gamma``.  With ``g < 1`` the verdict is coercive with margin
    ``eps = delta / gamma``, ``delta = sqrt(1 - g^2)``, and
    ``P = P1 + P2`` solving the indefinite equation.  With ``g > 1`` and
    the direct multi-start solve also failing, the verdict is
    not_coercive; boundary or conflicting evidence yields not_certified.

    Raises
    ------
    StabilizationError
        If mean-square stabilizability cannot be certified.
    """
    W = hermitian_part(as_matrix(W, "W", square=True))
    if W.shape[0] != plant.n:
        raise DimensionError("W must match the state dimension")
    P2, P1, A_cl, _, g, W1, W2 = _compose_solution(plant, W, shift=split_shift)
    gamma = input_state_gain(A_cl, plant.N, plant.B)

    if P2 is not None:
        delta = math.sqrt(max(0.0, 1.0 - g * g))
        eps = delta / gamma if gamma > 0.0 else float("inf")
        P = hermitian_part(P1 + P2)
        residual = stoch_riccati_residual(plant, W, P)
        scale = _residual_scale(plant.A, plant.N, plant.B, W, P)
        if residual > 1e-8 * scale:
            log.warning(
                "composition residual %.3e above certification threshold", residual
            )
            return StochCoercivityReport(
                stabilizing_P=None, P1=P1, P2=P2, W1=W1, W2=W2,
                delta=delta, gamma=gamma, eps=None, verdict="not_certified",
                brl_gain=g, residual=residual,
            )
        return StochCoercivityReport(
            stabilizing_P=P, P1=P1, P2=P2, W1=W1, W2=W2,
            delta=delta, gamma=gamma, eps=eps, verdict="coercive",
            brl_gain=g, residual=residual,
        )

    if g <= 1.0 + BRL_BAND:
        verdict = "not_certified"
        direct = _no_solution()
    else:
        direct = solve_stoch_riccati(plant, W)
        verdict = (
            "not_coercive"
            if direct.classification in ("no_solution", "non_stabilizing")
            else "not_certified"
        )
    return StochCoercivityReport(
        stabilizing_P=direct.P if direct.classification == "stabilizing" else None,
        P1=P1, P2=None, W1=W1, W2=W2,
        delta=None, gamma=gamma, eps=None, verdict=verdict,
        brl_gain=g, residual=None,
    )


def normalize_cost(plant: StochPlant, M: CostWeight):
    """Reduce a general quadratic cost to the normalized form by completing
    the square.

    With ``u = R^{-1/2} v - R^{-1} V x`` the cost
    ``x^* W x + 2 Re(u^* V x) + u^* R u`` becomes ``x^* Wt x + ||v||^2``
    over the transformed plant, where

        At = A - B R^{-1} V,   Bt = B R^{-1/2},   Wt = W - V^* R^{-1} V.

    Returns ``(plant_t, Wt)``; verdicts and solutions of the normalized
    problem transfer back through the same substitution.
    """
    if M.n != plant.n or M.m != plant.m:
        raise DimensionError("cost weight does not match plant dimensions")
    R = M.R
    vals, vecs = np.linalg.eigh(R)
    R_inv = vecs @ np.diag(1.0 / vals) @ vecs.conj().T
    R_inv_half = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.conj().T
    At = plant.A - plant.B @ R_inv @ M.V
    Bt = plant.B @ R_inv_half
    Wt = hermitian_part(M.W - M.V.conj().T @ R_inv @ M.V)
    return StochPlant(At, plant.N, Bt), Wt
