import json
import shutil
import subprocess
import sys

import pytest

from permflag.cli import RunConfig, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_enumerate(capsys):
    code, out, err = run(capsys, "enumerate", "--n", "3")
    assert code == 0 and out.split() == ["123", "132", "213", "231", "312", "321"]
    code, out, _ = run(capsys, "enumerate", "--n", "2", "--type", "1")
    assert out.split() == ["12@1", "12@2", "21@1", "21@2"]
    code, out, _ = run(capsys, "enumerate", "--n", "0")
    assert code == 0 and out == "\n"
    code, out, _ = run(capsys, "enumerate", "--n", "3", "--forbid", "123")
    assert len(out.split()) == 5


def test_usage_errors(capsys):
    assert run(capsys, "enumerate")[0] == 2
    assert run(capsys, "enumerate", "--n", "3", "--forbid", "1224")[0] == 2
    assert run(capsys, "upper-bound", "1324", "--n", "3")[0] == 2
    assert run(capsys, "upper-bound", "2413", "--n", "4", "--layered-only")[0] == 2
    assert run(capsys, "lower-bound", "--preset", "nope")[0] == 2
    assert run(capsys, "lower-bound")[0] == 2
    assert run(capsys, "verify", "missing.json")[0] == 2
    assert run(capsys, "bogus")[0] == 2


def test_crude(capsys):
    code, out, _ = run(capsys, "upper-bound", "12", "--n", "3", "--forbid", "123", "--crude")
    assert code == 0 and "2/3" in out


def test_upper_bound_and_verify(capsys, tmp_path):
    cert = tmp_path / "c.json"
    code, out, _ = run(capsys, "upper-bound", "132", "--n", "3", "--output", str(cert))
    assert code == 0
    assert "[certify] bound 0.4641016" in out
    data = json.loads(cert.read_text())
    assert data["pattern"] == "132"
    code, out, _ = run(capsys, "verify", str(cert))
    assert code == 0 and "VERIFIED" in out

    data["bound"] = "1/3"
    cert.write_text(json.dumps(data))
    code, out, _ = run(capsys, "verify", str(cert))
    assert code == 1 and "[FAIL] bound" in out

    data["n"] = "x"
    cert.write_text(json.dumps(data))
    code, _, err = run(capsys, "verify", str(cert))
    assert code == 2 and "n" in err


def test_upper_bound_trivial(capsys, tmp_path):
    cert = tmp_path / "c.json"
    code, out, _ = run(capsys, "upper-bound", "12", "--n", "2", "--output", str(cert))
    assert code == 0
    assert json.loads(cert.read_text())["bound"] == "1/1"


def test_default_output_name(tmp_path, monkeypatch):
    cfg = RunConfig("upper-bound", pattern="1342", n=6, forbid=["2431"])
    assert str(cfg.default_output()) == "certs/1342_n6_forb2431.json"
    assert str(RunConfig("upper-bound", pattern="132", n=3).default_output()) == "certs/132_n3.json"


def test_solver_failure_exit_code(capsys, tmp_path):
    fake = tmp_path / "fake"
    fake.write_text(f"#!{sys.executable}\nimport sys\nprint('Failure'); sys.exit(4)\n")
    fake.chmod(0o755)
    code, _, err = run(capsys, "upper-bound", "132", "--n", "3", "--solver", str(fake),
                       "--output", str(tmp_path / "c.json"))
    assert code == 1 and "[solve]" in err
    code, _, err = run(capsys, "upper-bound", "132", "--n", "3", "--solver", "no-such-solver")
    assert code == 1


def test_lower_bound(capsys):
    code, out, _ = run(capsys, "lower-bound", "--preset", "215634")
    assert code == 0 and "0.123456790123" in out
    code, out, _ = run(capsys, "lower-bound", "--preset", "batkeyev")
    assert "0.1965796" in out
    code, out, _ = run(capsys, "lower-bound", "--preset", "gamma1324", "--optimize")
    value = float(out.strip().split("= ")[-1])
    assert value > 0.244054321
    code, out, _ = run(capsys, "lower-bound", "--preset", "132", "--mc", "--samples", "20000")
    assert code == 0 and "monte carlo" in out


def test_lower_bound_from_file(capsys, tmp_path):
    path = tmp_path / "mu.json"
    path.write_text(json.dumps({"kind": "grid", "rows": ["1/2", "1/2"], "cols": ["1/2", "1/2"],
                                "cells": [{"r": 0, "c": 0, "node": {"kind": "dec"}},
                                          {"r": 1, "c": 1, "node": {"kind": "dec"}}]}))
    code, out, _ = run(capsys, "lower-bound", "--permuton", str(path), "--pattern", "12")
    assert code == 0 and "0.500000000000" in out
    assert run(capsys, "lower-bound", "--permuton", str(path))[0] == 2
    path.write_text("{")
    assert run(capsys, "lower-bound", "--permuton", str(path), "--pattern", "12")[0] == 2


def test_sample(capsys):
    code, out, _ = run(capsys, "sample", "--preset", "1432", "--n", "12", "--seed", "4")
    assert code == 0
    code2, out2, _ = run(capsys, "sample", "--preset", "1432", "--n", "12", "--seed", "4")
    assert out == out2
    assert sorted(map(int, out.strip().split(","))) == list(range(1, 13))


def test_byte_identical_certificates(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "upper-bound", "132", "--n", "3", "--output", str(a))
    run(capsys, "upper-bound", "132", "--n", "3", "--output", str(b))
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.skipif(shutil.which("permflag") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["permflag", "enumerate", "--n", "2"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.split() == ["12", "21"]
