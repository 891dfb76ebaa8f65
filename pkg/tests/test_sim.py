"""Monte Carlo engine: determinism, moments, costs and decay rates."""

import io

import numpy as np
import pytest

from kypcert import (
    SimConfig,
    StochPlant,
    empirical_ms_check,
    estimate_cost,
    mix64,
    moments_to_csv,
    ms_abscissa,
    simulate,
    solve_wonham,
)


def cfg(**kw):
    base = dict(dt=1e-3, horizon=2.0, paths=2000, seed=0)
    base.update(kw)
    return SimConfig(**base)


def test_mix64_is_deterministic_and_spreads():
    assert mix64(1, 2) == mix64(1, 2)
    vals = {mix64(s, i) for s in range(4) for i in range(64)}
    assert len(vals) == 256
    assert all(0 <= v < 2**64 for v in vals)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0, horizon=1.0, paths=10, seed=0)
    with pytest.raises(ValueError):
        SimConfig(dt=0.1, horizon=0.5, paths=10, seed=0)  # under 100 steps
    with pytest.raises(ValueError):
        SimConfig(dt=1e-3, horizon=1.0, paths=11, seed=0)  # odd antithetic
    with pytest.raises(ValueError):
        SimConfig(dt=1e-3, horizon=1.0, paths=0, seed=0)
    c = SimConfig(dt=1e-3, horizon=1.0, paths=11, seed=0, antithetic=False)
    assert c.steps == 1000


def test_noise_free_matches_exponential():
    plant = StochPlant([[-1.0]], [[0.0]], [[0.0]])
    traj = simulate(plant, [[0.0]], [1.0], cfg())
    exact = np.exp(2.0 * (-1.0) * traj.times)
    # Euler-Maruyama bias is O(dt) in the exponent
    assert np.max(np.abs(traj.mean_sq / exact - 1.0)) < 5e-3
    assert not traj.exploded


def test_zero_initial_state_stays_zero():
    plant = StochPlant([[-0.5]], [[1.0]], [[0.0]])
    traj = simulate(plant, [[0.0]], [0.0], cfg(paths=64))
    assert np.all(traj.mean_sq == 0.0)


def test_bitwise_determinism():
    plant = StochPlant([[-1.0]], [[0.7]], [[0.0]])
    a = simulate(plant, [[0.0]], [1.0], cfg(seed=42))
    b = simulate(plant, [[0.0]], [1.0], cfg(seed=42))
    assert np.array_equal(a.mean_sq, b.mean_sq)
    c = simulate(plant, [[0.0]], [1.0], cfg(seed=43))
    assert not np.array_equal(a.mean_sq, c.mean_sq)
    e1 = estimate_cost(plant, [[0.0]], [[1.0]], [1.0], cfg(seed=9))
    e2 = estimate_cost(plant, [[0.0]], [[1.0]], [1.0], cfg(seed=9))
    assert e1.mean == e2.mean and e1.half_width == e2.half_width


def test_complex_system_realified_consistently():
    # |x(t)|^2 depends only on Re(a) when the noise is off; the Euler
    # step inflates the modulus by |1 + a dt|^2 per step, i.e. about
    # |a|^2 dt per unit time in the exponent
    plant = StochPlant([[-1.0 + 5.0j]], [[0.0]], [[0.0]])
    traj = simulate(plant, [[0.0]], [1.0 + 0.0j], cfg(horizon=1.0))
    exact = np.exp(-2.0 * traj.times)
    assert np.max(np.abs(traj.mean_sq / exact - 1.0)) < 3e-2


def test_explosion_flagged_and_truncated():
    # log growth rate ~ 2a per path: crosses the 1e100 cap near t = 14
    plant = StochPlant([[8.0]], [[0.5]], [[0.0]])
    traj = simulate(plant, [[0.0]], [1.0], cfg(horizon=40.0, paths=16, seed=1))
    assert traj.exploded
    assert traj.times.size < int(round(40.0 / 1e-3)) + 1
    assert np.all(np.isfinite(traj.mean_sq))
    est = estimate_cost(plant, [[0.0]], [[1.0]], [1.0], cfg(horizon=40.0, paths=16, seed=1))
    assert est.exploded


def test_estimate_cost_linear_sde_closed_form():
    # B = 0, W = 1: J = int_0^inf E x^2 = x0^2 / |2a + n^2| for 4th-moment
    # stable parameters; here a = -1, n = 0.5: J = 1 / 1.75
    plant = StochPlant([[-1.0]], [[0.5]], [[0.0]])
    est = estimate_cost(plant, [[0.0]], [[1.0]], [1.0], cfg(horizon=8.0, paths=20000, seed=12))
    exact = 1.0 / 1.75
    assert abs(est.mean - exact) <= 3.0 * est.half_width
    assert est.truncation_bound < est.half_width


def test_estimate_cost_under_feedback_matches_riccati_value():
    plant = StochPlant([[-1.0]], [[0.3]], [[1.0]])
    rep = solve_wonham(plant, np.eye(1))
    F = -plant.B.conj().T @ rep.P
    est = estimate_cost(plant, F, np.eye(1), [1.0], cfg(horizon=6.0, paths=10000, seed=5))
    exact = float(np.real(rep.P[0, 0]))
    assert abs(est.mean - exact) <= 3.0 * est.half_width


def test_antithetic_reduces_interval_on_smooth_instance():
    plant = StochPlant([[-1.0]], [[0.3]], [[1.0]])
    rep = solve_wonham(plant, np.eye(1))
    F = -plant.B.conj().T @ rep.P
    base = dict(dt=1e-3, horizon=6.0, paths=10000, seed=5)
    anti = estimate_cost(plant, F, np.eye(1), [1.0], SimConfig(antithetic=True, **base))
    plain = estimate_cost(plant, F, np.eye(1), [1.0], SimConfig(antithetic=False, **base))
    assert anti.half_width < plain.half_width


def test_empirical_ms_check_scalar_rates():
    plant = StochPlant([[-1.0]], [[0.3]], [[0.0]])
    rho = ms_abscissa(plant.A, plant.N)
    rep = empirical_ms_check(plant, [[0.0]], cfg(horizon=2.0, paths=10000, seed=5))
    assert rep.stable
    assert abs(rep.decay_rate_estimate - rho) <= 0.15 * abs(rho)


def test_empirical_ms_check_two_state():
    A = np.array([[-1.0, 0.5], [0.0, -1.2]])
    N = 0.2 * np.eye(2)
    plant = StochPlant(A, N, np.zeros((2, 1)))
    rho = ms_abscissa(A, N)
    rep = empirical_ms_check(plant, np.zeros((1, 2)), cfg(horizon=2.0, paths=10000, seed=5))
    assert rep.stable
    assert abs(rep.decay_rate_estimate - rho) <= 0.15 * abs(rho)


def test_empirical_ms_check_detects_instability():
    # Hurwitz drift, mean-square unstable through the noise
    plant = StochPlant([[-0.4]], [[1.0]], [[0.0]])
    rep = empirical_ms_check(plant, [[0.0]], cfg(horizon=0.6, paths=40000, seed=11))
    assert not rep.stable
    assert rep.decay_rate_estimate > 0


def test_moments_to_csv_layout():
    plant = StochPlant([[-1.0]], [[0.0]], [[0.0]])
    traj = simulate(plant, [[0.0]], [1.0], cfg(paths=4, horizon=0.2))
    buf = io.StringIO()
    moments_to_csv(traj, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "t,mean_sq"
    assert len(lines) == traj.times.size + 1
    t0, v0 = map(float, lines[1].split(","))
    assert t0 == 0.0 and v0 == traj.mean_sq[0]
