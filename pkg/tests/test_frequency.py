"""Popov function evaluation and the frequency-domain condition scan."""

import io

import numpy as np
import pytest

from kypcert import (
    CostWeight,
    LinearPlant,
    default_grid,
    fdc_scan,
    popov,
    scan_to_csv,
    shift_weight,
    strict_margin,
)
from kypcert.frequency import NONSTRICT_TOL
from tests.conftest import rand_complex, random_det_instance

SCALAR = LinearPlant([[-1.0]], [[1.0]])
IDENTITY = CostWeight.identity(1, 1)


def test_cost_weight_validation():
    with pytest.raises(ValueError):
        CostWeight(W=[[1.0]], V=None, R=[[0.0]])  # R not PD
    with pytest.raises(Exception):
        CostWeight(W=[[1.0, 0.0]], V=None, R=[[1.0]])
    M = CostWeight(W=[[2.0]], V=None, R=[[1.0]])
    assert np.allclose(M.V, 0.0)
    assert M.n == 1 and M.m == 1
    assert M.M.shape == (2, 2)


def test_popov_scalar_closed_form():
    # Phi(omega) = 1 + 1 / (1 + omega^2) for the scalar benchmark
    for omega in (0.0, 1.0, 3.0):
        val = popov(SCALAR, IDENTITY, omega)
        assert abs(val[0, 0] - (1.0 + 1.0 / (1.0 + omega**2))) < 1e-12


def test_popov_hermitian_random():
    rng = np.random.default_rng(4)
    for _ in range(10):
        plant, M = random_det_instance(rng)
        Phi = popov(plant, M, float(rng.uniform(-5, 5)))
        assert np.linalg.norm(Phi - Phi.conj().T) < 1e-10


def test_default_grid_shape():
    grid = default_grid(points=64)
    assert np.all(np.diff(grid) > 0)
    assert 0.0 in grid
    assert np.allclose(grid, -grid[::-1])
    assert grid.max() == pytest.approx(1e3)


def test_scan_scalar_benchmark():
    scan = fdc_scan(SCALAR, IDENTITY)
    assert scan.nonstrict_ok
    # uniform strict margin attains sqrt(2) at omega = 0
    assert abs(scan.strict_margin - np.sqrt(2.0)) < 1e-6
    assert abs(strict_margin(SCALAR, IDENTITY) - np.sqrt(2.0)) < 1e-6


def test_scan_detects_violation():
    M = CostWeight(W=[[-3.0]], V=None, R=[[1.0]])
    scan = fdc_scan(SCALAR, M)
    assert not scan.nonstrict_ok
    assert scan.strict_margin is None
    idx = scan.argmin()
    assert abs(scan.grid[idx]) < 0.2  # violation is deepest near omega = 0
    assert scan.min_eigs[idx] == pytest.approx(-2.0, abs=1e-6)


def test_scan_nudges_imaginary_axis_poles():
    # undamped oscillator: poles at +-i must be stepped around, not hit
    plant = LinearPlant([[0.0, 1.0], [-1.0, 0.0]], [[0.0], [1.0]])
    M = CostWeight.identity(2, 1)
    grid = np.array([-1.0, 0.0, 1.0, 2.0])
    scan = fdc_scan(plant, M, grid)
    assert len(scan.nudged) >= 2
    assert np.all(np.isfinite(scan.min_eigs))


def test_shift_weight_matches_popov_identity():
    # Phi_shifted = Phi - eps^2 G^* G pointwise in frequency
    rng = np.random.default_rng(21)
    plant, M = random_det_instance(rng)
    eps = 0.37
    shifted = shift_weight(M, eps)
    for omega in (0.0, 0.9, -2.3):
        G = np.linalg.solve(1j * omega * np.eye(plant.n) - plant.A, plant.B)
        lhs = popov(plant, shifted, omega)
        rhs = popov(plant, M, omega) - eps**2 * G.conj().T @ G
        assert np.linalg.norm(lhs - rhs) < 1e-10


def test_strict_margin_consistent_with_shifted_scan():
    # shifting by a margin below the measured one keeps the scan nonnegative
    rng = np.random.default_rng(33)
    checked = 0
    while checked < 5:
        plant, M = random_det_instance(rng)
        scan = fdc_scan(plant, M)
        if scan.strict_margin is None or scan.strict_margin < 1e-3:
            continue
        shifted = shift_weight(M, 0.95 * scan.strict_margin)
        assert fdc_scan(plant, shifted).nonstrict_ok
        checked += 1


def test_scan_to_csv_round_trip():
    scan = fdc_scan(SCALAR, IDENTITY, grid=default_grid(points=16))
    buf = io.StringIO()
    scan_to_csv(scan, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "omega,min_eig"
    assert len(lines) == scan.grid.size + 1
    w, lam = map(float, lines[1].split(","))
    assert w == scan.grid[0] and lam == scan.min_eigs[0]


def test_nonstrict_tolerance_band():
    # a marginally negative minimum inside the band still passes nonstrict
    assert NONSTRICT_TOL == 1e-9
