"""Euler-Maruyama Monte Carlo validation of the stochastic certificates.

Simulates ``dx = (A + B F) x dt + N x dw`` under linear feedback,
estimates quadratic costs with confidence intervals, and fits empirical
mean-square decay rates.  Everything here is a falsification tool: the
exact answers come from the generalized Lyapunov and Riccati machinery,
and the simulator checks them from the opposite direction.

Reproducibility contract: path ``p`` draws its increments from
``PCG64(mix64(seed, p))`` (antithetic runs use ``mix64(seed, p // 2)``
and flip the sign on odd ``p``), and all ensemble reductions use fixed
chunk boundaries with pairwise summation, so results are bitwise
identical for identical configurations regardless of evaluation order.
Complex systems are realified (doubled dimension, isometric on norms)
before simulation, since the Wiener increments are real.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError
from .linmat import as_matrix, hermitian_part
from .stability import StochPlant, ms_abscissa

__all__ = [
    "SimConfig",
    "CostEstimate",
    "MomentTrajectory",
    "EmpiricalMsReport",
    "mix64",
    "simulate",
    "estimate_cost",
    "empirical_ms_check",
    "moments_to_csv",
]

log = logging.getLogger(__name__)

#: squared-norm level above which a path counts as exploded
EXPLOSION_CAP = 1e100

#: fixed path-chunk width for the vectorized sweep (even, for antithetic pairs)
CHUNK = 256

_MASK64 = (1 << 64) - 1


def mix64(seed: int, index: int) -> int:
    """Derive the 64-bit substream seed of a path.

    SplitMix64 finalizer applied to ``seed + (index + 1) * golden`` with
    ``golden = 0x9E3779B97F4A7C15``, all arithmetic mod 2^64:

        z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
        z ^= z >> 27; z *= 0x94D049BB133111EB
        z ^= z >> 31

    Any generator seedable by a 64-bit integer reproduces the streams.
    """
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run configuration.

    ``horizon`` must cover at least 100 steps; ``paths`` at least 2, and
    even when ``antithetic`` (paths are consumed in sign-flipped pairs).
    """

    dt: float
    horizon: float
    paths: int
    seed: int
    antithetic: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.horizon < 100 * self.dt:
            raise ValueError("horizon must be at least 100 dt")
        if self.paths < 2:
            raise ValueError("need at least 2 paths")
        if self.antithetic and self.paths % 2 != 0:
            raise ValueError("antithetic runs need an even path count")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class MomentTrajectory:
    """Sampled ensemble average of the squared state norm.

    ``exploded`` marks runs truncated at the first step where any path
    crossed the overflow cap; ``times`` and ``mean_sq`` then stop there.
    """

    times: np.ndarray
    mean_sq: np.ndarray
    exploded: bool


@dataclass(frozen=True)
class CostEstimate:
    """Monte Carlo cost value with a 95% normal-approximation interval.

    ``truncation_bound`` estimates the discarded tail of the time
    integral from the terminal integrand level and the mean-square decay
    rate; it is infinite when the closed loop is not mean-square stable.
    """

    mean: float
    half_width: float
    paths_used: int
    truncation_bound: float
    exploded: bool = False


@dataclass(frozen=True)
class EmpiricalMsReport:
    """Fitted mean-square decay rate and its stability call.

    ``stable`` requires the slope confidence interval to lie strictly
    below zero.
    """

    decay_rate_estimate: float
    half_width: float
    stable: bool


def _realify(*mats):
    """Real doubled-dimension representation of complex matrices.

    ``x -> [Re x; Im x]`` turns ``M x`` into ``[[Re M, -Im M], [Im M,
    Re M]] [Re x; Im x]`` and preserves Euclidean norms.
    """
    out = []
    for M in mats:
        Mr = np.real(M)
        Mi = np.imag(M)
        out.append(np.block([[Mr, -Mi], [Mi, Mr]]))
    return out


def _real_system(plant: StochPlant, F: np.ndarray, x0: np.ndarray,
                 force_realify: bool = False):
    A_cl = plant.A + plant.B @ F
    N = plant.N
    if not force_realify and (
        np.max(np.abs(A_cl.imag)) == 0.0
        and np.max(np.abs(N.imag)) == 0.0
        and np.max(np.abs(np.imag(x0))) == 0.0
    ):
        return A_cl.real.copy(), N.real.copy(), x0.real.copy().reshape(-1), False
    Ar, Nr = _realify(A_cl, N)
    xr = np.concatenate([np.real(x0), np.imag(x0)])
    return Ar, Nr, xr, True


def _path_chunks(paths: int):
    starts = range(0, paths, CHUNK)
    return [(s, min(s + CHUNK, paths)) for s in starts]


def _chunk_noise(cfg: SimConfig, lo: int, hi: int) -> np.ndarray:
    """Per-path Wiener increments for paths ``lo..hi-1`` on the full grid."""
    steps = cfg.steps
    scale = np.sqrt(cfg.dt)
    noise = np.empty((hi - lo, steps))
    for row, p in enumerate(range(lo, hi)):
        base = p // 2 if cfg.antithetic else p
        rng = np.random.Generator(np.random.PCG64(mix64(cfg.seed, base)))
        draw = rng.standard_normal(steps)
        if cfg.antithetic and p % 2 == 1:
            draw = -draw
        noise[row] = scale * draw
    return noise


def _sweep(plant: StochPlant, F, x0, cfg: SimConfig, group_of, n_groups: int,
           integrand=None, force_realify: bool = False):
    """Vectorized Euler-Maruyama sweep with fixed-order reductions.

    Accumulates per-group sums of the squared state norm at every node
    and, when ``integrand`` is given (a real symmetric matrix ``Q``),
    the per-path trapezoidal integral of ``x^T Q x``.  Returns
    ``(times, group_sums, path_integrals, explosion_step)``.
    """
    A_cl, N, xr, _ = _real_system(
        plant, F, np.asarray(x0, dtype=complex), force_realify
    )
    steps = cfg.steps
    dt = cfg.dt
    times = dt * np.arange(steps + 1)
    AclT = np.ascontiguousarray(A_cl.T)
    NT = np.ascontiguousarray(N.T)
    partials = []
    integrals = np.zeros(cfg.paths)
    explosion_step = steps + 1
    # overflow past the explosion cap is detected and truncated, not an error
    with np.errstate(over="ignore", invalid="ignore"):
        for lo, hi in _path_chunks(cfg.paths):
            width = hi - lo
            noise = _chunk_noise(cfg, lo, hi)
            X = np.tile(xr, (width, 1))
            sums = np.zeros((n_groups, steps + 1))
            gidx = group_of[lo:hi]
            acc = np.zeros(width) if integrand is not None else None
            for j in range(steps + 1):
                nsq = np.einsum("ij,ij->i", X, X)
                sums[:, j] += np.bincount(gidx, weights=nsq, minlength=n_groups)
                if not bool(np.all(nsq <= EXPLOSION_CAP)):
                    explosion_step = min(explosion_step, j)
                if integrand is not None:
                    wt = dt if 0 < j < steps else 0.5 * dt
                    acc += wt * np.einsum("ij,jk,ik->i", X, integrand, X)
                if j < steps:
                    X = X + dt * (X @ AclT) + (X @ NT) * noise[:, j][:, None]
            partials.append(sums)
            if integrand is not None:
                integrals[lo:hi] = acc
    group_sums = np.sum(np.stack(partials, axis=0), axis=0)
    return times, group_sums, integrals, explosion_step


def simulate(plant: StochPlant, F, x0, cfg: SimConfig) -> MomentTrajectory:
    """Ensemble second-moment trajectory of the closed loop.

    Euler-Maruyama steps ``x_{j+1} = x_j + (A + BF) x_j dt + N x_j dW_j``
    with per-path deterministic substreams.  A path crossing the
    overflow cap truncates the reported trajectory at that step and sets
    the explosion flag.
    """
    F = as_matrix(F, "F")
    if F.shape != (plant.m, plant.n):
        raise DimensionError(f"F must be {plant.m}x{plant.n}, got {F.shape}")
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    if x0.shape[0] != plant.n:
        raise DimensionError(f"x0 must have length {plant.n}")
    group_of = np.zeros(cfg.paths, dtype=np.intp)
    times, sums, _, exp_step = _sweep(plant, F, x0, cfg, group_of, 1)
    mean_sq = sums[0] / cfg.paths
    exploded = exp_step <= cfg.steps
    if exploded:
        times = times[:exp_step]
        mean_sq = mean_sq[:exp_step]
        log.warning("simulate: explosion at t=%.4g, trajectory truncated",
                    exp_step * cfg.dt)
    return MomentTrajectory(times=times, mean_sq=mean_sq, exploded=exploded)


def estimate_cost(plant: StochPlant, F, W, x0, cfg: SimConfig) -> CostEstimate:
    """Monte Carlo estimate of ``E int (x^* W x + ||F x||^2) dt``.

    Trapezoidal time integration per path, truncated at the horizon; the
    interval is the 95% normal approximation over per-path integrals (or
    antithetic pair means).  The reported truncation bound divides the
    terminal ensemble integrand by the mean-square decay rate.
    """
    F = as_matrix(F, "F")
    if F.shape != (plant.m, plant.n):
        raise DimensionError(f"F must be {plant.m}x{plant.n}, got {F.shape}")
    W = hermitian_part(as_matrix(W, "W", square=True))
    if W.shape[0] != plant.n:
        raise DimensionError("W must match the state dimension")
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    if x0.shape[0] != plant.n:
        raise DimensionError(f"x0 must have length {plant.n}")

    # the cost weights force the doubled representation even when the
    # dynamics are real, so x^T Q x equals Re(x^* W x) + ||F x||^2 exactly
    force = bool(
        np.max(np.abs(W.imag)) > 0.0 or np.max(np.abs(F.imag)) > 0.0
    )
    _, _, _, is_complex = _real_system(plant, F, x0, force)
    if is_complex:
        Wr2, Fr2 = _realify(W, F)
    else:
        Wr2, Fr2 = W.real.copy(), F.real.copy()
    Q = Wr2 + Fr2.T @ Fr2
    Q = 0.5 * (Q + Q.T)
    group_of = np.zeros(cfg.paths, dtype=np.intp)
    times, sums, integrals, exp_step = _sweep(
        plant, F, x0, cfg, group_of, 1, integrand=Q, force_realify=is_complex
    )
    exploded = exp_step <= cfg.steps

    # exploded sweeps leave overflowed integrals behind; the flag below
    # marks the estimate unreliable, so reduce without overflow noise
    with np.errstate(over="ignore", invalid="ignore"):
        if cfg.antithetic:
            samples = 0.5 * (integrals[0::2] + integrals[1::2])
        else:
            samples = integrals
        mean = float(np.mean(samples))
        if samples.size > 1:
            half = float(1.96 * np.std(samples, ddof=1) / np.sqrt(samples.size))
        else:
            half = float("inf")

    lift_rate = ms_abscissa(plant.A + plant.B @ F, plant.N)
    if exploded or lift_rate >= 0.0:
        bound = float("inf")
    else:
        mean_sq_end = sums[0, -1] / cfg.paths
        w_term = float(np.max(np.abs(np.linalg.eigvalsh(W))))
        f_term = float(np.linalg.norm(F, 2)) ** 2
        bound = (w_term + f_term) * mean_sq_end / abs(lift_rate)
    return CostEstimate(
        mean=mean,
        half_width=half,
        paths_used=cfg.paths,
        truncation_bound=float(bound),
        exploded=exploded,
    )


def empirical_ms_check(plant: StochPlant, F, cfg: SimConfig) -> EmpiricalMsReport:
    """Fit the mean-square decay rate of the closed loop from samples.

    Sums the second-moment trajectories over canonical initial states,
    fits the log-slope over the last half of the horizon by least
    squares, and derives the interval from slopes of disjoint path
    groups.  ``stable`` means the interval lies below zero.
    """
    F = as_matrix(F, "F")
    if F.shape != (plant.m, plant.n):
        raise DimensionError(f"F must be {plant.m}x{plant.n}, got {F.shape}")
    n_groups = max(2, min(10, cfg.paths // 2))
    group_of = (np.arange(cfg.paths) * n_groups) // cfg.paths
    group_counts = np.bincount(group_of, minlength=n_groups).astype(float)

    totals = None
    exp_step = cfg.steps + 1
    times = None
    for i in range(plant.n):
        e_i = np.zeros(plant.n)
        e_i[i] = 1.0
        times, sums, _, step = _sweep(plant, F, e_i, cfg, group_of, n_groups)
        exp_step = min(exp_step, step)
        totals = sums if totals is None else totals + sums
    if exp_step <= cfg.steps:
        totals = totals[:, :exp_step]
        times = times[:exp_step]
    means = totals / group_counts[:, None]

    half_start = times.shape[0] // 2
    t_fit = times[half_start:]
    slopes = np.empty(n_groups)
    for g in range(n_groups):
        y = np.log(np.maximum(means[g, half_start:], 1e-300))
        slopes[g] = np.polyfit(t_fit, y, 1)[0]
    overall = float(np.mean(slopes))
    half = float(1.96 * np.std(slopes, ddof=1) / np.sqrt(n_groups))
    stable = bool(overall + half < 0.0)
    log.info("empirical_ms_check: slope %.4f +- %.4f, stable=%s",
             overall, half, stable)
    return EmpiricalMsReport(
        decay_rate_estimate=overall, half_width=half, stable=stable
    )


def moments_to_csv(trajectory: MomentTrajectory, fileobj) -> None:
    """Write the trajectory as CSV with header ``t,mean_sq``."""
    fileobj.write("t,mean_sq\n")
    for t, v in zip(trajectory.times, trajectory.mean_sq):
        fileobj.write(f"{float(t)!r},{float(v)!r}\n")
