"""Command-line front end: system files, analysis commands, reports.

System descriptions live in self-contained JSON files::

    {"kind": "deterministic" | "stochastic",
     "A": [[...]], "B": [[...]], "N": [[...]],      # N only for stochastic
     "cost": {"W": [[...]], "V": [[...]], "R": [[...]]},
     "name": "free-form label"}

Matrix entries are real numbers or ``[re, im]`` pairs.  ``V`` and ``R``
default to zero and identity, so a stochastic file may carry a bare
state weight.  All machine output (JSON reports or CSV) goes to stdout;
diagnostics go to stderr under ``KYPC_LOG={error|info|debug}``.  Verdicts
are data: commands exit nonzero only on genuine error conditions.
"""

from __future__ import annotations

import json
import logging
import math
import os
import sys
from dataclasses import dataclass

import click
import numpy as np

from .coercivity import (
    COERCIVITY_TOL,
    check_coercivity,
    resonance_witness,
    witness_to_csv,
)
from .exceptions import KypcertError, SystemFileError
from .frequency import NONSTRICT_TOL, CostWeight, default_grid, fdc_scan, scan_to_csv
from .riccati_det import ALMOST_TOL, STABILIZING_TOL, solve_are
from .sim import SimConfig, estimate_cost, moments_to_csv, simulate
from .stability import LinearPlant, StochPlant, ms_abscissa
from .stoch_lq import (
    BRL_BAND,
    coercivity_stoch,
    normalize_cost,
    solve_stoch_riccati,
    solve_wonham,
    stoch_riccati_residual,
)

__all__ = [
    "SystemBundle",
    "parse_system_file",
    "emit_system_file",
    "analyze_deterministic",
    "analyze_stochastic",
    "main",
]

HERMITIAN_TOL = 1e-8

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# system files


@dataclass(frozen=True)
class SystemBundle:
    """Validated contents of a system description file."""

    kind: str
    A: np.ndarray
    B: np.ndarray
    N: np.ndarray | None
    cost: CostWeight
    name: str = ""

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def plant(self) -> StochPlant:
        """The system as a stochastic plant (zero noise when deterministic)."""
        N = self.N if self.N is not None else np.zeros_like(self.A)
        return StochPlant(self.A, N, self.B)


def _entry(value, where: str) -> complex:
    if isinstance(value, bool):
        raise SystemFileError("schema", f"schema violation: {where} entry is a boolean")
    if isinstance(value, (int, float)):
        return complex(value)
    if (
        isinstance(value, list)
        and len(value) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        return complex(value[0], value[1])
    raise SystemFileError(
        "schema",
        f"schema violation: {where} entries must be numbers or [re, im] pairs",
    )


def _parse_matrix(obj, field: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise SystemFileError(
            "schema", f"schema violation: {field} must be a list of rows"
        )
    width = len(obj[0])
    if width == 0 or any(len(r) != width for r in obj):
        raise SystemFileError(
            "schema", f"schema violation: {field} rows have inconsistent lengths"
        )
    out = np.empty((len(obj), width), dtype=complex)
    for i, row in enumerate(obj):
        for j, val in enumerate(row):
            out[i, j] = _entry(val, f"{field}[{i}][{j}]")
    return out


def _hermitianize(X: np.ndarray, field: str) -> np.ndarray:
    dev = float(np.max(np.abs(X - X.conj().T))) if X.size else 0.0
    if dev > HERMITIAN_TOL:
        raise SystemFileError(
            "hermitian",
            f"cost block {field} deviates from Hermitian by {dev:.3e} (> {HERMITIAN_TOL:g})",
        )
    return 0.5 * (X + X.conj().T)


def _bundle_from_dict(data, path: str) -> SystemBundle:
    if not isinstance(data, dict):
        raise SystemFileError("schema", f"schema violation: {path} is not a JSON object")
    kind = data.get("kind")
    if kind not in ("deterministic", "stochastic"):
        raise SystemFileError(
            "schema", "schema violation: kind must be 'deterministic' or 'stochastic'"
        )
    for field in ("A", "B"):
        if field not in data:
            raise SystemFileError("schema", f"schema violation: missing field {field}")
    A = _parse_matrix(data["A"], "A")
    n = A.shape[0]
    if A.shape[1] != n:
        raise SystemFileError("dimension", "dimension mismatch: A is not square")
    B = _parse_matrix(data["B"], "B")
    if B.shape[0] != n:
        raise SystemFileError("dimension", "dimension mismatch: B rows")
    m = B.shape[1]

    N = None
    if "N" in data and data["N"] is not None:
        if kind == "deterministic":
            raise SystemFileError(
                "schema", "schema violation: N is only valid for stochastic kind"
            )
        N = _parse_matrix(data["N"], "N")
        if N.shape != (n, n):
            raise SystemFileError("dimension", "dimension mismatch: N shape")
    elif kind == "stochastic":
        N = np.zeros((n, n), dtype=complex)

    cost_obj = data.get("cost")
    if not isinstance(cost_obj, dict) or "W" not in cost_obj:
        raise SystemFileError("schema", "schema violation: missing field cost.W")
    W = _parse_matrix(cost_obj["W"], "cost.W")
    if W.shape != (n, n):
        raise SystemFileError("dimension", "dimension mismatch: cost.W shape")
    W = _hermitianize(W, "W")
    if cost_obj.get("V") is not None:
        V = _parse_matrix(cost_obj["V"], "cost.V")
        if V.shape != (m, n):
            raise SystemFileError("dimension", "dimension mismatch: cost.V shape")
    else:
        V = np.zeros((m, n), dtype=complex)
    if cost_obj.get("R") is not None:
        R = _parse_matrix(cost_obj["R"], "cost.R")
        if R.shape != (m, m):
            raise SystemFileError("dimension", "dimension mismatch: cost.R shape")
        R = _hermitianize(R, "R")
    else:
        R = np.eye(m, dtype=complex)
    if np.min(np.linalg.eigvalsh(R)) <= 0.0:
        raise SystemFileError("cost", "R not positive definite")

    name = data.get("name", "")
    if not isinstance(name, str):
        raise SystemFileError("schema", "schema violation: name must be a string")
    return SystemBundle(
        kind=kind, A=A, B=B, N=N, cost=CostWeight(W=W, V=V, R=R), name=name
    )


def parse_system_file(path: str) -> SystemBundle:
    """Load and validate a JSON system description."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SystemFileError("io", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SystemFileError("json", f"invalid JSON in {path}: {exc}") from exc
    return _bundle_from_dict(data, path)


def _encode_matrix(X) -> list | None:
    if X is None:
        return None
    X = np.asarray(X, dtype=complex)
    if X.ndim == 1:
        X = X[None, :]
    return [[[float(v.real), float(v.imag)] for v in row] for row in X]


def emit_system_file(bundle: SystemBundle, path: str) -> None:
    """Write a bundle back to disk; round-trips through parse_system_file."""
    data = {
        "kind": bundle.kind,
        "A": _encode_matrix(bundle.A),
        "B": _encode_matrix(bundle.B),
        "cost": {
            "W": _encode_matrix(bundle.cost.W),
            "V": _encode_matrix(bundle.cost.V),
            "R": _encode_matrix(bundle.cost.R),
        },
    }
    if bundle.kind == "stochastic":
        data["N"] = _encode_matrix(
            bundle.N if bundle.N is not None else np.zeros_like(bundle.A)
        )
    if bundle.name:
        data["name"] = bundle.name
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# report builders


def _enc_float(x) -> float | str | None:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def analyze_deterministic(
    bundle: SystemBundle, grid_points: int = 2048, grid_max: float = 1e3
) -> dict:
    """Full deterministic analysis: scan, Riccati solve, coercivity check.

    The cross-check verdict compares the nonstrict frequency verdict
    against the time-domain certificate, treating margins inside the
    coercivity tolerance band as boundary cases rather than conflicts.
    """
    if bundle.kind != "deterministic":
        raise SystemFileError("kind", "analyze-det requires a deterministic system")
    plant = LinearPlant(bundle.A, bundle.B)
    M = bundle.cost
    grid = default_grid(points=grid_points, omega_max=grid_max)
    scan = fdc_scan(plant, M, grid)
    riccati = solve_are(plant, M)
    cert = check_coercivity(plant, M)

    if abs(cert.eps_hat) <= COERCIVITY_TOL or abs(float(np.min(scan.min_eigs))) <= NONSTRICT_TOL:
        cross = "boundary"
    elif scan.nonstrict_ok == (cert.verdict == "coercive"):
        cross = "consistent"
    else:
        cross = "inconsistent"

    idx = scan.argmin()
    return {
        "kind": "deterministic",
        "name": bundle.name,
        "settings": {
            "grid_points": int(grid_points),
            "grid_max": float(grid_max),
            "nonstrict_tolerance": NONSTRICT_TOL,
            "coercivity_tolerance": COERCIVITY_TOL,
            "stabilizing_tolerance": STABILIZING_TOL,
            "almost_tolerance": ALMOST_TOL,
        },
        "frequency": {
            "verdict": "passes_nonstrict" if scan.nonstrict_ok else "fails",
            "min_eig": _enc_float(np.min(scan.min_eigs)),
            "argmin_omega": _enc_float(scan.grid[idx]),
            "strict_margin": _enc_float(scan.strict_margin),
            "evaluated_points": int(scan.grid.size),
            "nudged_points": len(scan.nudged),
        },
        "riccati": {
            "classification": riccati.classification,
            "residual": _enc_float(riccati.residual),
            "closed_loop_abscissa": _enc_float(riccati.closed_loop_measure),
            "P": _encode_matrix(riccati.P),
        },
        "coercivity": {
            "verdict": cert.verdict,
            "eps_hat": _enc_float(cert.eps_hat),
            "eps_sq": _enc_float(cert.eps_sq),
            "horizon": _enc_float(cert.T),
            "dt": _enc_float(cert.dt),
            "witness_cost": _enc_float(cert.witness_cost),
        },
        "cross_check": cross,
    }


def analyze_stochastic(bundle: SystemBundle) -> dict:
    """Full stochastic analysis on the normalized cost.

    General costs are first reduced by completing the square; verdicts
    are invariant under that substitution, and the report records the
    normalized data it analyzed.
    """
    if bundle.kind != "stochastic":
        raise SystemFileError("kind", "analyze-stoch requires a stochastic system")
    plant, W = normalize_cost(bundle.plant(), bundle.cost)
    report = coercivity_stoch(plant, W)
    direct = solve_stoch_riccati(plant, W)

    closed_ms = None
    if direct.P is not None:
        A_cl = plant.A - plant.B @ (plant.B.conj().T @ direct.P)
        closed_ms = ms_abscissa(A_cl, plant.N)
    composition = report.residual
    if composition is None and report.P2 is not None:
        composition = stoch_riccati_residual(plant, W, report.P1 + report.P2)

    return {
        "kind": "stochastic",
        "name": bundle.name,
        "settings": {
            "brl_band": BRL_BAND,
            "composition_tolerance": 1e-8,
        },
        "ms_stability": {
            "open_loop_ms_abscissa": _enc_float(ms_abscissa(plant.A, plant.N)),
            "closed_loop_ms_abscissa": _enc_float(closed_ms),
        },
        "verdict": report.verdict,
        "gamma": _enc_float(report.gamma),
        "delta": _enc_float(report.delta),
        "eps": _enc_float(report.eps),
        "brl_gain": _enc_float(report.brl_gain),
        "composition_residual": _enc_float(composition),
        "wonham": {
            "P1": _encode_matrix(report.P1),
            "W1": _encode_matrix(report.W1),
            "W2": _encode_matrix(report.W2),
        },
        "P2": _encode_matrix(report.P2),
        "riccati": {
            "classification": direct.classification,
            "residual": _enc_float(direct.residual),
            "closed_loop_ms_abscissa": _enc_float(closed_ms),
            "P": _encode_matrix(direct.P),
        },
    }


# ---------------------------------------------------------------------------
# commands


def _emit(report: dict) -> None:
    click.echo(json.dumps(report, sort_keys=True, allow_nan=False))


def _guarded(body):
    try:
        return body()
    except SystemFileError as exc:
        log.error("%s", exc)
        _emit({"error": {"code": exc.code, "message": exc.message}})
        raise SystemExit(2)
    except KypcertError as exc:
        log.error("%s", exc)
        _emit({"error": {"code": type(exc).__name__, "message": str(exc)}})
        raise SystemExit(1)


def _parse_vector(text: str, what: str) -> np.ndarray:
    try:
        parts = [complex(tok) for tok in text.replace(" ", "").split(",") if tok]
    except ValueError as exc:
        raise SystemFileError(
            "schema", f"cannot parse {what}: {exc} (use e.g. '1,0.5+2j')"
        ) from exc
    if not parts:
        raise SystemFileError("schema", f"{what} is empty")
    return np.asarray(parts, dtype=complex)


@click.group()
def main() -> None:
    """Coercivity and Riccati analysis for linear-quadratic systems."""
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("KYPC_LOG", "error").strip().lower(), logging.ERROR
    )
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )


@main.command("analyze-det")
@click.argument("file", type=click.Path())
@click.option("--grid-points", type=int, default=2048, show_default=True)
@click.option("--grid-max", type=float, default=1e3, show_default=True)
def analyze_det_cmd(file: str, grid_points: int, grid_max: float) -> None:
    """Frequency scan, Riccati solve and coercivity check for FILE."""

    def body():
        bundle = parse_system_file(file)
        _emit(analyze_deterministic(bundle, grid_points=grid_points, grid_max=grid_max))

    _guarded(body)


@main.command("analyze-stoch")
@click.argument("file", type=click.Path())
def analyze_stoch_cmd(file: str) -> None:
    """Mean-square stability, gains and Riccati reports for FILE."""

    def body():
        bundle = parse_system_file(file)
        _emit(analyze_stochastic(bundle))

    _guarded(body)


@main.command("scan-frequency")
@click.argument("file", type=click.Path())
@click.option("--csv", "csv_path", type=click.Path(), default=None, help="Write CSV here instead of stdout.")
def scan_frequency_cmd(file: str, csv_path: str | None) -> None:
    """CSV of (omega, min_eig) for the frequency scan of FILE."""

    def body():
        bundle = parse_system_file(file)
        if bundle.kind != "deterministic":
            raise SystemFileError("kind", "scan-frequency requires a deterministic system")
        plant = LinearPlant(bundle.A, bundle.B)
        scan = fdc_scan(plant, bundle.cost)
        if csv_path is None:
            scan_to_csv(scan, click.get_text_stream("stdout"))
        else:
            with open(csv_path, "w", encoding="utf-8", newline="") as fh:
                scan_to_csv(scan, fh)
            _emit(
                {
                    "csv": csv_path,
                    "evaluated_points": int(scan.grid.size),
                    "min_eig": _enc_float(np.min(scan.min_eigs)),
                    "verdict": "passes_nonstrict" if scan.nonstrict_ok else "fails",
                }
            )

    _guarded(body)


@main.command("witness")
@click.argument("file", type=click.Path())
@click.option("--omega", type=float, required=True, help="Violating frequency.")
@click.option("--eta", type=str, required=True, help="Comma-separated input direction, e.g. '1,0.5+2j'.")
@click.option("--cycles", type=int, default=1, show_default=True, help="Initial middle-segment cycle count.")
def witness_cmd(file: str, omega: float, eta: str, cycles: int) -> None:
    """Negative-cost witness input as CSV (cost in leading comments)."""

    def body():
        bundle = parse_system_file(file)
        if bundle.kind != "deterministic":
            raise SystemFileError("kind", "witness requires a deterministic system")
        plant = LinearPlant(bundle.A, bundle.B)
        direction = _parse_vector(eta, "--eta")
        if direction.size != plant.m:
            raise SystemFileError(
                "dimension", f"dimension mismatch: --eta needs {plant.m} entries"
            )
        control = resonance_witness(plant, bundle.cost, omega, direction, k=cycles)
        out = click.get_text_stream("stdout")
        out.write(f"# total_cost={control.total_cost!r}\n")
        out.write(f"# phi_value={control.phi_value!r}\n")
        seg = ",".join(repr(float(c)) for c in control.segment_costs)
        out.write(f"# segment_costs={seg}\n")
        out.write(f"# ramp_cycles={control.ramp_cycles}\n")
        witness_to_csv(control, out)

    _guarded(body)


@main.command("simulate")
@click.argument("file", type=click.Path())
@click.option("--feedback", type=click.Choice(["zero", "wonham", "riccati"]), default="zero", show_default=True)
@click.option("--paths", type=int, default=10000, show_default=True)
@click.option("--dt", type=float, default=1e-3, show_default=True)
@click.option("--horizon", type=float, default=10.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--x0", type=str, default="", help="Initial state, comma separated; default all-ones.")
@click.option("--csv", "csv_path", type=click.Path(), default=None, help="Also write the mean-square trajectory CSV here.")
def simulate_cmd(
    file: str,
    feedback: str,
    paths: int,
    dt: float,
    horizon: float,
    seed: int,
    x0: str,
    csv_path: str | None,
) -> None:
    """Monte Carlo cost estimate for FILE under a chosen feedback."""

    def body():
        bundle = parse_system_file(file)
        plant = bundle.plant()
        M = bundle.cost
        normalized, Wn = normalize_cost(plant, M)

        if feedback == "zero":
            F_norm = np.zeros((normalized.m, normalized.n), dtype=complex)
        elif feedback == "wonham":
            if np.min(np.linalg.eigvalsh(Wn)) <= 0.0:
                raise SystemFileError(
                    "cost",
                    "wonham feedback requires a positive definite normalized state weight",
                )
            rep = solve_wonham(normalized, Wn)
            F_norm = -normalized.B.conj().T @ rep.P
        else:
            rep = solve_stoch_riccati(normalized, Wn)
            if rep.P is None or rep.classification != "stabilizing":
                raise SystemFileError(
                    "cost",
                    f"riccati feedback unavailable: classification={rep.classification}",
                )
            F_norm = -normalized.B.conj().T @ rep.P

        # back-substitute u = R^{-1/2} v - R^{-1} V x into original coordinates
        vals, vecs = np.linalg.eigh(M.R)
        R_inv = vecs @ np.diag(1.0 / vals) @ vecs.conj().T
        R_inv_half = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.conj().T
        F = R_inv_half @ F_norm - R_inv @ M.V
        # estimate_cost integrates x^*(Q + F^*F)x; fold the general cost into Q
        Q_eff = M.W + M.V.conj().T @ F + F.conj().T @ M.V + F.conj().T @ M.R @ F
        W_arg = Q_eff - F.conj().T @ F

        x0_vec = _parse_vector(x0, "--x0") if x0 else np.ones(plant.n, dtype=complex)
        if x0_vec.size != plant.n:
            raise SystemFileError(
                "dimension", f"dimension mismatch: --x0 needs {plant.n} entries"
            )
        cfg = SimConfig(dt=dt, horizon=horizon, paths=paths, seed=seed)
        est = estimate_cost(plant, F, W_arg, x0_vec, cfg)
        if csv_path is not None:
            traj = simulate(plant, F, x0_vec, cfg)
            with open(csv_path, "w", encoding="utf-8", newline="") as fh:
                moments_to_csv(traj, fh)

        _emit(
            {
                "config": {
                    "dt": float(dt),
                    "horizon": float(horizon),
                    "paths": int(paths),
                    "seed": int(seed),
                    "antithetic": True,
                    "feedback": feedback,
                },
                "x0": _encode_matrix(x0_vec),
                "feedback_gain": _encode_matrix(F),
                "cost": {
                    "mean": _enc_float(est.mean),
                    "half_width": _enc_float(est.half_width),
                    "paths_used": int(est.paths_used),
                    "truncation_bound": _enc_float(est.truncation_bound),
                    "exploded": bool(est.exploded),
                },
            }
        )

    _guarded(body)


if __name__ == "__main__":
    main()
