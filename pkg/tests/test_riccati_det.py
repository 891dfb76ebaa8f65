"""Deterministic algebraic Riccati solves and their classification."""

import numpy as np
import pytest
import scipy.linalg

from kypcert import (
    CostWeight,
    LinearPlant,
    are_residual,
    newton_kleinman,
    solve_are,
    stabilize_det,
)
from kypcert.riccati_det import ALMOST_TOL, STABILIZING_TOL
from tests.conftest import rand_complex, random_det_instance

SCALAR = LinearPlant([[-1.0]], [[1.0]])
IDENTITY = CostWeight.identity(1, 1)


def test_scalar_benchmark_value():
    report = solve_are(SCALAR, IDENTITY)
    assert report.classification == "stabilizing"
    assert abs(report.P[0, 0] - (np.sqrt(2.0) - 1.0)) < 1e-12
    assert report.residual < 1e-12
    assert report.closed_loop_measure == pytest.approx(-np.sqrt(2.0), abs=1e-10)


def test_matches_scipy_on_definite_costs():
    # independent oracle: scipy's continuous ARE on definite random costs
    rng = np.random.default_rng(14)
    done = 0
    while done < 15:
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 3))
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, m))
        plant = LinearPlant(A, B)
        C = rng.standard_normal((n, n))
        W = C.T @ C + 0.1 * np.eye(n)
        M = CostWeight(W=W, V=None, R=np.eye(m))
        report = solve_are(plant, M)
        if report.classification != "stabilizing":
            continue
        ref = scipy.linalg.solve_continuous_are(A, B, W, np.eye(m))
        assert np.linalg.norm(report.P - ref) <= 1e-7 * (1.0 + np.linalg.norm(ref))
        done += 1


def test_indefinite_cost_negative_solution():
    # W = -1/2 still admits a stabilizing solution; it is negative
    M = CostWeight(W=[[-0.5]], V=None, R=[[1.0]])
    report = solve_are(SCALAR, M)
    assert report.classification == "stabilizing"
    assert abs(report.P[0, 0] - (np.sqrt(0.5) - 1.0)) < 1e-12
    assert report.P[0, 0] < 0


def test_no_solution_when_fdc_fails():
    M = CostWeight(W=[[-3.0]], V=None, R=[[1.0]])
    report = solve_are(SCALAR, M)
    assert report.classification == "no_solution"
    assert report.P is None
    assert np.isnan(report.residual)


def test_almost_stabilizing_boundary():
    # integrator with zero state weight: P = 0, closed loop on the boundary
    plant = LinearPlant([[0.0]], [[1.0]])
    M = CostWeight(W=[[0.0]], V=None, R=[[1.0]])
    report = solve_are(plant, M)
    assert report.classification == "almost_stabilizing"
    assert abs(report.P[0, 0]) < 1e-10


def test_residual_contract_randomized():
    rng = np.random.default_rng(6)
    for _ in range(40):
        plant, M = random_det_instance(rng)
        report = solve_are(plant, M)
        if report.P is None:
            continue
        assert report.residual == pytest.approx(are_residual(plant, M, report.P))
        if report.classification == "stabilizing":
            scale = 1.0 + np.linalg.norm(M.W) + np.linalg.norm(report.P) ** 2
            assert report.residual <= 1e-9 * scale
            assert report.closed_loop_measure < -STABILIZING_TOL


def test_newton_kleinman_refines_to_tolerance():
    rng = np.random.default_rng(27)
    plant, _ = random_det_instance(rng)
    C = rand_complex(rng, plant.n, plant.n)
    M = CostWeight(W=C.conj().T @ C + 0.2 * np.eye(plant.n), V=None, R=np.eye(plant.m))
    F0 = stabilize_det(plant)
    refined = newton_kleinman(plant, M, F0)
    P = refined.P
    assert refined.classification == "stabilizing"
    assert are_residual(plant, M, P) <= 1e-10 * (1.0 + np.linalg.norm(P) ** 2)
    ref = solve_are(plant, M)
    assert np.linalg.norm(P - ref.P) <= 1e-8 * (1.0 + np.linalg.norm(ref.P))


def test_classification_bands_exported():
    assert STABILIZING_TOL == 1e-9
    assert ALMOST_TOL == 1e-7
