"""Command-line interface: parsing, reports, exit codes, determinism."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from kypcert import SystemFileError
from kypcert.cli import (
    analyze_deterministic,
    analyze_stochastic,
    emit_system_file,
    main,
    parse_system_file,
)


@pytest.fixture()
def runner():
    return CliRunner()


def write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload) if isinstance(payload, dict) else payload)
    return str(path)


DET = {
    "kind": "deterministic",
    "A": [[-1.0]],
    "B": [[1.0]],
    "cost": {"W": [[1.0]], "V": [[0.0]], "R": [[1.0]]},
    "name": "scalar benchmark",
}
STOCH = {
    "kind": "stochastic",
    "A": [[-1.0]],
    "N": [[1.0]],
    "B": [[1.0]],
    "cost": {"W": [[1.0]]},
}


def test_parse_happy_path(tmp_path):
    bundle = parse_system_file(write(tmp_path, "s.json", DET))
    assert bundle.kind == "deterministic"
    assert bundle.n == 1 and bundle.m == 1
    assert bundle.name == "scalar benchmark"
    assert np.allclose(bundle.cost.R, 1.0)


def test_parse_complex_entries(tmp_path):
    payload = dict(DET, A=[[[-1.0, 0.5]]], name="")
    bundle = parse_system_file(write(tmp_path, "c.json", payload))
    assert bundle.A[0, 0] == -1.0 + 0.5j


@pytest.mark.parametrize(
    "mutate, code",
    [
        (lambda d: d.pop("A"), "schema"),
        (lambda d: d.update(kind="weird"), "schema"),
        (lambda d: d.update(B=[[1.0], [2.0]]), "dimension"),
        (lambda d: d.update(N=[[1.0]]), "schema"),  # N on deterministic kind
        (lambda d: d.update(cost={"W": [[1.0, 2.0], [3.0, 4.0]]}), "dimension"),
        (lambda d: d.update(cost={"W": [[1.0]], "R": [[0.0]]}), "cost"),
        (lambda d: d.update(cost={"W": [["x"]]}), "schema"),
    ],
)
def test_parse_error_codes(tmp_path, mutate, code):
    payload = json.loads(json.dumps(DET))
    mutate(payload)
    with pytest.raises(SystemFileError) as err:
        parse_system_file(write(tmp_path, "bad.json", payload))
    assert err.value.code == code


def test_parse_non_hermitian_cost(tmp_path):
    payload = {
        "kind": "deterministic",
        "A": [[-1.0, 0.0], [0.0, -1.0]],
        "B": [[1.0], [0.0]],
        "cost": {"W": [[1.0, 0.5], [0.0, 1.0]]},
    }
    with pytest.raises(SystemFileError) as err:
        parse_system_file(write(tmp_path, "h.json", payload))
    assert err.value.code == "hermitian"


def test_parse_rejects_invalid_json_and_missing_file(tmp_path):
    with pytest.raises(SystemFileError) as err:
        parse_system_file(write(tmp_path, "t.json", "{not json"))
    assert err.value.code == "json"
    with pytest.raises(SystemFileError) as err:
        parse_system_file(str(tmp_path / "absent.json"))
    assert err.value.code == "io"


def test_emit_round_trip(tmp_path):
    payload = {
        "kind": "stochastic",
        "A": [[[-1.0, 0.25]]],
        "N": [[0.5]],
        "B": [[2.0]],
        "cost": {"W": [[1.5]], "V": [[0.1]], "R": [[2.0]]},
        "name": "rt",
    }
    b1 = parse_system_file(write(tmp_path, "a.json", payload))
    out = str(tmp_path / "b.json")
    emit_system_file(b1, out)
    b2 = parse_system_file(out)
    assert b2.kind == b1.kind and b2.name == b1.name
    for x, y in (
        (b1.A, b2.A),
        (b1.B, b2.B),
        (b1.N, b2.N),
        (b1.cost.W, b2.cost.W),
        (b1.cost.V, b2.cost.V),
        (b1.cost.R, b2.cost.R),
    ):
        assert np.max(np.abs(x - y)) <= 1e-15


def test_analyze_det_command(tmp_path, runner):
    res = runner.invoke(main, ["analyze-det", write(tmp_path, "d.json", DET)])
    assert res.exit_code == 0
    report = json.loads(res.output)
    assert report["cross_check"] == "consistent"
    assert report["frequency"]["verdict"] == "passes_nonstrict"
    assert report["riccati"]["classification"] == "stabilizing"
    assert report["riccati"]["P"][0][0][0] == pytest.approx(np.sqrt(2.0) - 1.0)
    assert report["coercivity"]["verdict"] == "coercive"
    assert report["settings"]["grid_points"] == 2048


def test_analyze_det_verdict_is_data_not_failure(tmp_path, runner):
    payload = dict(DET, cost={"W": [[-3.0]], "V": [[0.0]], "R": [[1.0]]}, name="bad")
    res = runner.invoke(main, ["analyze-det", write(tmp_path, "v.json", payload)])
    assert res.exit_code == 0  # a negative verdict is still a success
    report = json.loads(res.output)
    assert report["frequency"]["verdict"] == "fails"
    assert report["coercivity"]["verdict"] == "not_coercive"
    assert report["riccati"]["classification"] == "no_solution"
    assert report["cross_check"] == "consistent"


def test_analyze_det_error_exit(tmp_path, runner):
    payload = json.loads(json.dumps(DET))
    payload["B"] = [[1.0], [2.0]]
    res = runner.invoke(main, ["analyze-det", write(tmp_path, "e.json", payload)])
    assert res.exit_code == 2
    report = json.loads(res.output)
    assert report["error"]["code"] == "dimension"
    assert report["error"]["message"] == "dimension mismatch: B rows"


def test_analyze_stoch_command(tmp_path, runner):
    res = runner.invoke(main, ["analyze-stoch", write(tmp_path, "s.json", STOCH)])
    assert res.exit_code == 0
    report = json.loads(res.output)
    assert report["verdict"] == "coercive"
    assert report["gamma"] == pytest.approx(2.0 / 3.0, rel=1e-4)
    assert report["eps"] == pytest.approx(np.sqrt(5.0) / 2.0, rel=1e-3)
    assert report["riccati"]["classification"] == "stabilizing"
    assert report["composition_residual"] <= 1e-8


def test_scan_frequency_stdout_and_file(tmp_path, runner):
    path = write(tmp_path, "d.json", DET)
    res = runner.invoke(main, ["scan-frequency", path])
    assert res.exit_code == 0
    assert res.output.splitlines()[0] == "omega,min_eig"
    out = str(tmp_path / "scan.csv")
    res = runner.invoke(main, ["scan-frequency", path, "--csv", out])
    assert res.exit_code == 0
    summary = json.loads(res.output)
    assert summary["verdict"] == "passes_nonstrict"
    with open(out) as fh:
        assert fh.readline().strip() == "omega,min_eig"


def test_witness_command(tmp_path, runner):
    payload = dict(DET, cost={"W": [[-3.0]], "V": [[0.0]], "R": [[1.0]]}, name="bad")
    path = write(tmp_path, "w.json", payload)
    res = runner.invoke(main, ["witness", path, "--omega", "0", "--eta", "1"])
    assert res.exit_code == 0
    lines = res.output.splitlines()
    assert lines[0].startswith("# total_cost=")
    assert float(lines[0].split("=")[1]) < 0
    assert lines[1].startswith("# phi_value=")
    header_idx = next(i for i, l in enumerate(lines) if not l.startswith("#"))
    assert lines[header_idx] == "t,re_u1,im_u1"
    # non-violating direction is an error condition
    res = runner.invoke(main, ["witness", write(tmp_path, "g.json", DET), "--omega", "0", "--eta", "1"])
    assert res.exit_code == 1
    assert json.loads(res.output)["error"]["code"] == "NotViolatingError"


def test_simulate_command_deterministic_output(tmp_path, runner):
    path = write(tmp_path, "s.json", STOCH)
    args = [
        "simulate", path, "--feedback", "wonham", "--paths", "512",
        "--horizon", "1.0", "--seed", "7",
    ]
    res1 = runner.invoke(main, args)
    res2 = runner.invoke(main, args)
    assert res1.exit_code == 0
    assert res1.output == res2.output  # bitwise identical report
    report = json.loads(res1.output)
    assert report["cost"]["paths_used"] == 512
    assert report["feedback_gain"][0][0][0] == pytest.approx(-0.618034, rel=1e-4)
    out = str(tmp_path / "m.csv")
    res3 = runner.invoke(main, args + ["--csv", out])
    assert res3.exit_code == 0
    with open(out) as fh:
        assert fh.readline().strip() == "t,mean_sq"


def test_simulate_feedback_error(tmp_path, runner):
    payload = dict(STOCH, cost={"W": [[-5.0]]})
    path = write(tmp_path, "n.json", payload)
    res = runner.invoke(main, ["simulate", path, "--feedback", "wonham", "--horizon", "1.0", "--paths", "64"])
    assert res.exit_code == 2
    assert json.loads(res.output)["error"]["code"] == "cost"


def test_pure_report_builders_reject_wrong_kind(tmp_path):
    det = parse_system_file(write(tmp_path, "d.json", DET))
    stoch = parse_system_file(write(tmp_path, "s.json", STOCH))
    with pytest.raises(SystemFileError):
        analyze_deterministic(stoch)
    with pytest.raises(SystemFileError):
        analyze_stochastic(det)
