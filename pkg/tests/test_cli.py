import csv
import io
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from polygeom.cli import EXIT_FAIL, EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, EXIT_UNCONVERGED, dumps_report, main

FIX = Path(__file__).parent / "fixtures"
LEG = str(FIX / "legendre.json")
CIRCLE = str(FIX / "circle_lambda.json")
CIRCLE0 = str(FIX / "circle_weighted.json")
TINY = str(FIX / "circle_lambda_tiny_padding.json")
NEG = str(FIX / "negative_weight.json")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_orthogonalize_legendre(capsys):
    code, out, _ = run(capsys, "orthogonalize", "--spec", LEG, "--degree", "2")
    assert code == EXIT_OK
    table = rows(out)
    assert table[0] == ["n", "c0", "c1", "c2"] and len(table) == 4
    C = np.array([[float(v) for v in r[1:]] for r in table[1:]])
    expected = np.array(
        [[1 / np.sqrt(2), 0, 0], [0, np.sqrt(1.5), 0], [-np.sqrt(2.5) / 2, 0, 1.5 * np.sqrt(2.5)]]
    )
    np.testing.assert_allclose(C, expected, atol=1e-14)


def test_orthogonalize_unit_circle(capsys):
    code, out, _ = run(capsys, "orthogonalize", "--kind", "circle_weighted", "--fourier", "0:1", "--degree", "1")
    assert code == EXIT_OK
    table = rows(out)
    assert table[0] == ["n", "c-1", "c0", "c1"]
    np.testing.assert_array_equal(np.array([[float(v) for v in r[1:]] for r in table[1:]]), np.eye(3))


def test_negative_weight_is_invalid(capsys, tmp_path):
    out = tmp_path / "out.csv"
    code, stdout, err = run(capsys, "orthogonalize", "--spec", NEG, "--out", str(out))
    assert code == EXIT_INVALID
    assert "NonpositiveWeight" in err and stdout == ""
    assert not out.exists()


def test_failure_keeps_previous_output(capsys, tmp_path):
    out = tmp_path / "out.csv"
    out.write_text("previous\n")
    code, _, _ = run(capsys, "orthogonalize", "--spec", NEG, "--out", str(out))
    assert code == EXIT_INVALID and out.read_text() == "previous\n"
    assert os.listdir(tmp_path) == ["out.csv"]


def test_compare_identical(capsys):
    code, out, _ = run(capsys, "compare", "--spec", CIRCLE, "--spec2", CIRCLE)
    assert code == EXIT_OK
    doc = json.loads(out)
    q = doc["quantities"]
    assert q["d_res_compressed"] == 0 and q["weyl_gap"] == 0 and q["kernel_sup_diff"] == 0
    assert all(r["verdict"] == "pass" for r in doc["inequalities"])


def test_compare_circle_pair(capsys):
    code, out, _ = run(capsys, "compare", "--spec", CIRCLE, "--spec2", CIRCLE0)
    assert code == EXIT_OK
    doc = json.loads(out)
    names = {r["name"]: r for r in doc["inequalities"]}
    assert names["truncop<=C_N(w)*lambda"]["verdict"] == "pass"
    assert names["truncop<=C_N(w)*lambda"]["rhs"] == pytest.approx(20.48, rel=1e-9)


def test_compare_tiny_padding(capsys):
    code, out, _ = run(capsys, "compare", "--spec", TINY, "--spec2", CIRCLE0)
    assert code == EXIT_UNCONVERGED
    doc = json.loads(out)
    assert doc["quantities"]["padding_converged"] is False
    assert all(r["verdict"] == "withheld" for r in doc["inequalities"])


def test_compare_csv(capsys):
    code, out, _ = run(capsys, "compare", "--spec", CIRCLE, "--spec2", CIRCLE0, "--format", "csv")
    assert code == EXIT_OK
    table = rows(out)
    assert table[0] == ["name", "lhs", "rhs", "verdict", "tolerance"] and len(table) == 4


def test_compare_incompatible(capsys):
    code, _, err = run(capsys, "compare", "--spec", CIRCLE, "--spec2", LEG)
    assert code == EXIT_INVALID and "IncompatibleGeometries" in err


def test_compare_needs_second_geometry(capsys):
    assert run(capsys, "compare", "--spec", CIRCLE)[0] == EXIT_INVALID


def test_determinism(tmp_path, capsys):
    outs = []
    for i in range(2):
        path = tmp_path / f"cert{i}.json"
        assert main(["compare", "--spec", CIRCLE, "--spec2", CIRCLE0, "--out", str(path)]) == EXIT_OK
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert b"\r" not in outs[0]


def test_scan_lambda(capsys):
    code, out, _ = run(capsys, "scan-lambda", "--spec", CIRCLE0, "--degree", "4", "--grid", "1e-1,1e-2,1e-3,1e-4")
    assert code == EXIT_OK
    table = rows(out)
    assert len(table) == 5
    lam = [float(r[0]) for r in table[1:]]
    assert lam == sorted(lam)
    d = [float(r[1]) for r in table[1:]]
    slope = np.polyfit(np.log(lam), np.log(d), 1)[0]
    assert 0.9 <= slope <= 1.1


def test_scan_lambda_report(capsys):
    code, out, _ = run(
        capsys, "scan-lambda", "--spec", CIRCLE0, "--degree", "2", "--grid", "1e-1,1e-2,1e-3,1e-4", "--format", "report"
    )
    assert code == EXIT_OK
    assert 0.9 <= json.loads(out)["slope"] <= 1.1


def test_scan_epsilon(capsys):
    code, out, _ = run(
        capsys, "scan-epsilon", "--mode", "0", "--order", "0", "--degree", "3", "--grid", "0.1,0.01,0.001,0.0001"
    )
    assert code == EXIT_OK
    table = rows(out)
    assert table[0] == ["epsilon", "mode", "d_res", "projector_diff", "basis_residual"]
    d = [float(r[2]) for r in table[1:]]
    assert all(b <= max(a * 1.1, 1e-12) for a, b in zip(d, d[1:]))


@pytest.mark.parametrize("cmd", ["scan-lambda", "scan-epsilon"])
def test_empty_grid(capsys, cmd):
    spec = CIRCLE0 if cmd == "scan-lambda" else None
    argv = [cmd, "--degree", "2", "--grid", ""]
    if spec:
        argv += ["--spec", spec]
    code, _, err = run(capsys, *argv)
    assert code == EXIT_INVALID and "grid" in err


def test_scan_epsilon_rejects_bad_values(capsys):
    assert run(capsys, "scan-epsilon", "--degree", "2", "--grid", "0.1,0.01,0.001,1.5")[0] == EXIT_INVALID


def test_jacobi(capsys):
    code, out, _ = run(capsys, "jacobi", "--spec", LEG, "--degree", "3")
    assert code == EXIT_OK
    table = rows(out)
    assert table[0] == ["n", "a_n", "b_n"]
    assert float(table[2][1]) == pytest.approx(1 / np.sqrt(3), abs=1e-14)
    assert float(table[3][1]) == pytest.approx(2 / np.sqrt(15), abs=1e-14)


def test_jacobi_sobolev_is_numerical_failure(capsys):
    code, _, err = run(
        capsys, "jacobi", "--kind", "interval_sobolev", "--interval=-1,1", "--sobolev-coefficients", "1,1", "--degree", "5"
    )
    assert code == EXIT_NUMERICAL and "NotTridiagonal" in err


def test_laplacian_report(capsys):
    code, out, _ = run(capsys, "laplacian", "--spec", CIRCLE0, "--lam", "0.1", "--kind", "circle_sobolev", "--degree", "2", "--format", "report")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["labels"] == [0, -1, 1, -2, 2]
    assert doc["bandwidth"] >= 1


def test_tolerance_overrides(capsys, tmp_path):
    argv = ["orthogonalize", "--kind", "circle_weighted", "--fourier", "0:1,1:0.5", "--degree", "2"]
    assert run(capsys, *argv)[0] == EXIT_INVALID
    tol = tmp_path / "tol.json"
    tol.write_text('{"w_min_tol": 0}')
    assert run(capsys, *argv, "--tol-overrides", str(tol))[0] == EXIT_OK
    tol.write_text('{"no_such_tol": 1}')
    assert run(capsys, *argv, "--tol-overrides", str(tol))[0] == EXIT_INVALID


@pytest.mark.parametrize(
    "argv",
    [
        ["orthogonalize", "--spec", LEG],
        ["orthogonalize", "--degree", "2"],
        ["orthogonalize", "--kind", "torus", "--degree", "2"],
        ["orthogonalize", "--spec", "/nonexistent.json", "--degree", "2"],
        ["frobnicate"],
        ["orthogonalize", "--kind", "circle_weighted", "--fourier", "0", "--degree", "2"],
    ],
)
def test_invalid_invocations(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_INVALID


def test_invalid_json(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "orthogonalize", "--spec", str(bad), "--degree", "1")
    assert code == EXIT_INVALID and "not valid JSON" in err


def test_failing_verdict_exit_code(capsys, monkeypatch):
    import dataclasses

    from polygeom import resolvent

    real = resolvent.stability_certificate

    def failing(*a, **k):
        cert = real(*a, **k)
        bad = dataclasses.replace(cert.verdicts[0], passed=False)
        return dataclasses.replace(cert, verdicts=(bad,) + cert.verdicts[1:])

    monkeypatch.setattr(resolvent, "stability_certificate", failing)
    code, out, _ = run(capsys, "compare", "--spec", CIRCLE, "--spec2", CIRCLE0)
    assert code == EXIT_FAIL
    assert json.loads(out)["inequalities"][0]["verdict"] == "fail"


def test_report_formatting():
    text = dumps_report({"b": 0.1, "a": [1, -0.0], "c": 1 + 2j, "d": True})
    assert text == (
        '{\n  "a": [\n    1,\n    0\n  ],\n  "b": 0.10000000000000001,\n'
        '  "c": {\n    "im": 2,\n    "re": 1\n  },\n  "d": true\n}\n'
    )


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "polygeom", "orthogonalize", "--spec", LEG, "--degree", "0"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert res.returncode == 0
    header, row = res.stdout.splitlines()
    assert header == "n,c0"
    assert float(row.split(",")[1]) == pytest.approx(2**-0.5, abs=1e-15)
    assert len(row.split(",")[1].replace("0.", "", 1)) == 17
