"""Frequency-domain condition: Popov function scans and strict margins.

For a plant ``x' = A x + B u`` and a Hermitian cost weight

    M = [[W, V^*],
         [V, R]],        R > 0,

the Popov function is ``Phi(omega) = [G; I]^* M [G; I]`` with
``G = (i omega I - A)^{-1} B``.  The nonstrict frequency-domain condition
holds when ``Phi(omega) >= 0`` on the scan grid; the strict margin is the
largest ``eps >= 0`` with ``Phi(omega) >= eps^2 G^* G`` over the grid,
computed per frequency as a generalized eigenvalue after a Cholesky-free
symmetric reduction of the regularized right-hand form.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, PoleOnGridError
from .linmat import as_matrix, hermitian_part
from .stability import LinearPlant

__all__ = [
    "CostWeight",
    "FrequencyScan",
    "popov",
    "default_grid",
    "fdc_scan",
    "strict_margin",
    "shift_weight",
    "scan_to_csv",
]

log = logging.getLogger(__name__)

#: nonstrict verdict tolerance on eigenvalues of Phi
NONSTRICT_TOL = 1e-9

#: regularization added to G^*G before the generalized eigenvalue solve
GG_REGULARIZATION = 1e-14

#: minimal distance of a grid point to an imaginary-axis pole of (i w I - A)
POLE_TOL = 1e-9

#: offset applied to grid points that collide with a pole
POLE_NUDGE = 1e-6


@dataclass(frozen=True)
class CostWeight:
    """Hermitian quadratic cost weight with positive definite input block.

    Parameters
    ----------
    W : array_like, n x n
        State block; Hermitian, may be indefinite.
    V : array_like, m x n, or None
        Cross coupling block; ``None`` means zero.
    R : array_like, m x m
        Input block; must be Hermitian positive definite.

    The blocks are symmetrized on construction, so ``M`` is exactly
    Hermitian as stored.
    """

    W: np.ndarray
    V: np.ndarray | None
    R: np.ndarray

    def __post_init__(self):
        W = hermitian_part(as_matrix(self.W, "W", square=True))
        R = hermitian_part(as_matrix(self.R, "R", square=True))
        if self.V is None:
            V = np.zeros((R.shape[0], W.shape[0]), dtype=complex)
        else:
            V = as_matrix(self.V, "V")
        if V.shape != (R.shape[0], W.shape[0]):
            raise DimensionError(
                f"V must be {R.shape[0]}x{W.shape[0]}, got {V.shape}"
            )
        if np.min(np.linalg.eigvalsh(R)) <= 0.0:
            raise ValueError("R not positive definite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "R", R)

    @classmethod
    def identity(cls, n: int, m: int) -> "CostWeight":
        """The unit weight ``M = I`` on states and inputs."""
        return cls(np.eye(n), np.zeros((m, n)), np.eye(m))

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def m(self) -> int:
        return self.R.shape[0]

    @property
    def M(self) -> np.ndarray:
        """Assembled (n+m) x (n+m) Hermitian weight."""
        top = np.hstack([self.W, self.V.conj().T])
        bot = np.hstack([self.V, self.R])
        return np.vstack([top, bot])


def shift_weight(M: CostWeight, eps: float) -> CostWeight:
    """Shift the state block: ``W <- W - eps^2 I``.

    The strict condition with margin ``eps`` for ``M`` is the nonstrict
    condition for the shifted weight.
    """
    return CostWeight(M.W - eps**2 * np.eye(M.n), M.V, M.R)


def _check_compatible(plant: LinearPlant, M: CostWeight) -> None:
    if M.n != plant.n or M.m != plant.m:
        raise DimensionError(
            f"cost weight is for ({M.n}, {M.m}), plant is ({plant.n}, {plant.m})"
        )


def _transfer(plant: LinearPlant, omega: float, eigs: np.ndarray) -> np.ndarray:
    """``G = (i omega I - A)^{-1} B`` with an explicit pole guard."""
    gap = np.abs(1j * omega - eigs)
    idx = int(np.argmin(gap))
    if gap[idx] <= POLE_TOL:
        raise PoleOnGridError(
            f"pole on grid: omega={omega!r} is within {POLE_TOL} of eigenvalue "
            f"{eigs[idx]!r} of A"
        )
    shifted = 1j * omega * np.eye(plant.n) - plant.A
    return np.linalg.solve(shifted, plant.B)


def _popov_pair(plant: LinearPlant, M: CostWeight, omega: float, eigs: np.ndarray):
    """Return ``(Phi(omega), G(omega))`` symmetrized."""
    G = _transfer(plant, omega, eigs)
    Z = np.vstack([G, np.eye(plant.m, dtype=complex)])
    Phi = hermitian_part(Z.conj().T @ M.M @ Z)
    return Phi, G


def popov(plant: LinearPlant, M: CostWeight, omega: float) -> np.ndarray:
    """Popov function ``Phi(omega) = [G; I]^* M [G; I]``, Hermitian m x m.

    Raises
    ------
    PoleOnGridError
        If ``i omega`` is within 1e-9 of an eigenvalue of ``A``.
    """
    _check_compatible(plant, M)
    eigs = np.linalg.eigvals(plant.A)
    Phi, _ = _popov_pair(plant, M, float(omega), eigs)
    return Phi


def _gen_min_eig(Phi: np.ndarray, S: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian pencil ``(Phi, S)`` with S > 0.

    Uses the eigendecomposition of ``S`` instead of a Cholesky factor so
    severely ill-conditioned right-hand sides (regularized Gramians) do
    not abort the reduction.
    """
    w, U = np.linalg.eigh(S)
    w = np.maximum(w, 1e-300)
    T = U / np.sqrt(w)
    reduced = hermitian_part(T.conj().T @ Phi @ T)
    return float(np.min(np.linalg.eigvalsh(reduced)))


def default_grid(points: int = 2048, omega_min: float = 1e-3, omega_max: float = 1e3) -> np.ndarray:
    """Symmetric logarithmic grid ``-grid_half, 0, +grid_half``.

    ``points`` is the approximate total count; the result always contains
    zero and is symmetric about it.
    """
    if points < 3:
        raise ValueError("points must be at least 3")
    half = (points - 1) // 2
    mags = np.logspace(np.log10(omega_min), np.log10(omega_max), half)
    return np.concatenate([-mags[::-1], [0.0], mags])


@dataclass(frozen=True)
class FrequencyScan:
    """Result of a frequency-domain condition scan.

    Attributes
    ----------
    grid : numpy.ndarray
        Strictly increasing evaluation frequencies (after pole nudging).
    min_eigs : numpy.ndarray
        ``lambda_min(Phi(omega))`` per grid point.
    nonstrict_ok : bool
        All minimal eigenvalues at least ``-1e-9``.
    strict_margin : float or None
        Largest frequency-wise uniform margin ``eps >= 0``; ``None`` when
        the nonstrict condition already fails.
    nudged : tuple
        Pairs ``(requested_omega, evaluated_omega)`` for points that were
        moved off imaginary-axis poles.
    """

    grid: np.ndarray
    min_eigs: np.ndarray
    nonstrict_ok: bool
    strict_margin: float | None
    nudged: tuple = field(default_factory=tuple)

    def argmin(self) -> int:
        """Index of the most negative eigenvalue on the grid."""
        return int(np.argmin(self.min_eigs))


def _nudge_grid(grid: np.ndarray, eigs: np.ndarray):
    """Move grid points off imaginary-axis poles; record replacements."""
    axis_eigs = eigs[np.abs(eigs.real) <= POLE_TOL]
    moved = []
    out = []
    for omega in grid:
        if axis_eigs.size and np.min(np.abs(1j * omega - axis_eigs)) <= POLE_TOL:
            for candidate in (omega + POLE_NUDGE, omega - POLE_NUDGE):
                if np.min(np.abs(1j * candidate - axis_eigs)) > POLE_TOL:
                    moved.append((float(omega), float(candidate)))
                    out.append(candidate)
                    break
            else:
                raise PoleOnGridError(
                    f"pole on grid: omega={omega!r} cannot be nudged off the "
                    f"imaginary-axis spectrum of A"
                )
        else:
            out.append(float(omega))
    return np.unique(np.asarray(out, dtype=float)), tuple(moved)


def fdc_scan(
    plant: LinearPlant,
    M: CostWeight,
    grid=None,
    refine_factor: int = 4,
    refine_passes: int = 2,
) -> FrequencyScan:
    """Scan the frequency-domain condition over a grid.

    Evaluates ``lambda_min(Phi(omega))`` and the per-frequency strict
    margin on ``grid`` (default :func:`default_grid`), then refines the
    grid ``refine_passes`` times around the running minima by inserting
    ``refine_factor`` times denser local points.

    Returns
    -------
    FrequencyScan
    """
    _check_compatible(plant, M)
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("frequency grid must be nonempty")
    if not np.all(np.isfinite(grid)):
        raise ValueError("frequency grid must be finite")

    eigs = np.linalg.eigvals(plant.A)
    grid, nudged = _nudge_grid(np.sort(grid), eigs)
    nudged = list(nudged)

    def evaluate(omegas):
        lam = np.empty(len(omegas))
        gen = np.empty(len(omegas))
        for i, w in enumerate(omegas):
            Phi, G = _popov_pair(plant, M, w, eigs)
            lam[i] = np.min(np.linalg.eigvalsh(Phi))
            S = G.conj().T @ G + GG_REGULARIZATION * np.eye(plant.m)
            gen[i] = _gen_min_eig(Phi, S)
        return lam, gen

    lam, gen = evaluate(grid)

    for _ in range(max(0, refine_passes)):
        targets = {int(np.argmin(lam)), int(np.argmin(gen))}
        new_points = []
        for idx in targets:
            lo = grid[max(idx - 1, 0)]
            hi = grid[min(idx + 1, len(grid) - 1)]
            if hi <= lo:
                continue
            dense = np.linspace(lo, hi, 2 * refine_factor + 1)
            new_points.extend(dense[1:-1])
        new_points = np.setdiff1d(np.asarray(new_points, dtype=float), grid)
        if new_points.size == 0:
            break
        new_points, extra_moves = _nudge_grid(new_points, eigs)
        nudged.extend(extra_moves)
        new_lam, new_gen = evaluate(new_points)
        order = np.argsort(np.concatenate([grid, new_points]))
        grid = np.concatenate([grid, new_points])[order]
        lam = np.concatenate([lam, new_lam])[order]
        gen = np.concatenate([gen, new_gen])[order]

    nonstrict_ok = bool(np.min(lam) >= -NONSTRICT_TOL)
    if nonstrict_ok:
        margin = float(np.sqrt(max(0.0, np.min(gen))))
    else:
        margin = None
    log.info(
        "fdc_scan: %d points, min eig %.3e, nonstrict_ok=%s, strict_margin=%s",
        len(grid), float(np.min(lam)), nonstrict_ok, margin,
    )
    return FrequencyScan(
        grid=grid,
        min_eigs=lam,
        nonstrict_ok=nonstrict_ok,
        strict_margin=margin,
        nudged=tuple(nudged),
    )


def strict_margin(plant: LinearPlant, M: CostWeight, grid=None) -> float | None:
    """Largest uniform strict margin over the scan grid; None if nonstrict fails."""
    return fdc_scan(plant, M, grid=grid).strict_margin


def scan_to_csv(scan: FrequencyScan, fileobj) -> None:
    """Write the scan as CSV rows ``omega,min_eig`` to an open text file."""
    writer = csv.writer(fileobj)
    writer.writerow(["omega", "min_eig"])
    for w, lam in zip(scan.grid, scan.min_eigs):
        writer.writerow([repr(float(w)), repr(float(lam))])
