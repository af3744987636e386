import json
import subprocess
import sys

import numpy as np
import pytest

from fablekit.cli import EXIT_ERROR, EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from fablekit.formats import write_dense_csv, write_matrix_market
from fablekit.linalg import SparseMatrix


@pytest.fixture
def identity(tmp_path):
    p = tmp_path / "eye.mtx"
    write_matrix_market(p, SparseMatrix.from_dense(np.eye(4)))
    return p


def _report(capsys):
    return json.loads(capsys.readouterr().out)


def test_generate(tmp_path, capsys):
    out = tmp_path / "a.mtx"
    assert main(["generate", "--family", "uniform_sparse", "-n", "3", "-s", "4", "--seed", "2", "-o", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "nonzeros=32" and lines[1] == "s=4"
    assert out.read_text().startswith("%%MatrixMarket")


def test_generate_spec_file(tmp_path, capsys):
    spec = tmp_path / "spec.txt"
    spec.write_text("family=heisenberg\nn=3\nparam.Jx=1.0\nparam.Jz=0.5\n")
    assert main(["generate", "--spec", str(spec), "--prescale", "-o", str(tmp_path / "h.csv")]) == 0
    assert "max_abs_entry=1" in capsys.readouterr().out


def test_generate_usage(tmp_path, capsys):
    assert main(["generate", "-o", str(tmp_path / "x.mtx")]) == EXIT_USAGE
    assert main(["generate", "--family", "uniform_sparse", "-n", "2", "-s", "9", "-o", str(tmp_path / "x.mtx")]) == EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_encode_identity(identity, tmp_path, capsys):
    circ = tmp_path / "c.qasm"
    assert main(["encode", str(identity), "--delta", "0", "--circuit", str(circ)]) == EXIT_OK
    rep = _report(capsys)
    assert rep["schema"] == 1 and rep["epsilon"] <= 1e-10
    assert rep["alpha"] == 0.25 and rep["ancillas"] == 3
    assert rep["config"]["delta"] == 0.0 and rep["config"]["method"] == "FABLE"
    assert circ.read_text().startswith("OPENQASM 2.0;")


def test_encode_and_verify(tmp_path, capsys):
    A = tmp_path / "a.mtx"
    main(["generate", "--family", "uniform_sparse", "-n", "3", "-s", "2", "--seed", "5", "-o", str(A)])
    capsys.readouterr()
    for method in ("fable", "sfable", "lsfable"):
        circ = tmp_path / f"{method}.qasm"
        extra = [] if method == "lsfable" else ["--delta", "0.01"]
        assert main(["encode", str(A), "-m", method, "--circuit", str(circ), *extra]) == 0
        enc = _report(capsys)
        assert main(["verify", str(A), str(circ)]) == EXIT_OK
        ver = _report(capsys)
        assert ver["max_deviation"] <= 1e-10
        assert ver["epsilon"] == pytest.approx(enc["epsilon"], rel=1e-6, abs=1e-12)


def test_eps_target_replay(tmp_path, capsys):
    A = tmp_path / "a.mtx"
    main(["generate", "--family", "uniform_sparse", "-n", "5", "-s", "3", "--seed", "1", "-o", str(A)])
    capsys.readouterr()
    assert main(["encode", str(A), "-m", "sfable", "--eps", "0.01"]) == 0
    rep = _report(capsys)
    assert rep["reached"] and rep["epsilon"] < 0.01
    assert main(["encode", str(A), "-m", "sfable", "--delta", repr(rep["delta"])]) == 0
    assert _report(capsys)["rotations"] == rep["rotations"]
    assert main(["encode", str(A), "-m", "fable", "--eps", "1e-30"]) == EXIT_FAIL


@pytest.mark.slow
def test_encode_large_sparse(tmp_path, capsys):
    A = tmp_path / "a.mtx"
    main(["generate", "--family", "uniform_sparse", "-n", "10", "-s", "4", "--seed", "3", "-o", str(A)])
    capsys.readouterr()
    assert main(["encode", str(A), "-m", "sfable", "--eps", str(2.0**-10)]) == 0
    assert _report(capsys)["rotations"] < 2**20 / 8
    assert main(["encode", str(A), "-m", "lsfable"]) == 0
    rep = _report(capsys)
    assert rep["rotations"] <= 4096 + 1 and rep["rotations_without_offset"] <= 4096


def test_encode_errors(tmp_path, identity, capsys):
    big = tmp_path / "big.csv"
    write_dense_csv(big, 2 * np.eye(2))
    assert main(["encode", str(big)]) == EXIT_ERROR
    assert main(["encode", str(big), "--rescale"]) == EXIT_OK
    capsys.readouterr()
    zero = tmp_path / "zero.csv"
    write_dense_csv(zero, np.zeros((2, 2)))
    assert main(["encode", str(zero), "-m", "sfable"]) == EXIT_ERROR
    assert main(["encode", str(identity), "-m", "lsfable", "--delta", "0.1"]) == EXIT_USAGE
    assert main(["encode", str(tmp_path / "nope.mtx")]) == EXIT_ERROR
    with pytest.raises(SystemExit) as info:
        main(["encode", str(identity), "--delta", "0", "--eps", "0.1"])
    assert info.value.code == EXIT_USAGE


def test_verify_guard(tmp_path, capsys):
    A = tmp_path / "a.mtx"
    main(["generate", "--family", "uniform_sparse", "-n", "7", "-s", "1", "-o", str(A)])
    circ = tmp_path / "c.qasm"
    main(["encode", str(A), "-m", "lsfable", "--circuit", str(circ)])
    capsys.readouterr()
    assert main(["verify", str(A), str(circ)]) == EXIT_ERROR
    assert "closed-form" in capsys.readouterr().err


def test_verify_detects_mismatch(tmp_path, identity, capsys):
    circ = tmp_path / "c.qasm"
    main(["encode", str(identity), "--circuit", str(circ)])
    other = tmp_path / "o.csv"
    write_dense_csv(other, 0.5 * np.eye(4))
    capsys.readouterr()
    assert main(["verify", str(other), str(circ), "--eps", "1e-6"]) == EXIT_FAIL


def test_counts(tmp_path, identity, capsys):
    circ = tmp_path / "c.qasm"
    main(["encode", str(identity), "--circuit", str(circ)])
    capsys.readouterr()
    assert main(["counts", str(circ)]) == 0
    from_file = _report(capsys)["counts"]
    assert main(["counts", "--matrix", str(identity), "-m", "fable"]) == 0
    assert _report(capsys)["counts"] == from_file
    assert main(["counts"]) == EXIT_USAGE


def test_sweep_determinism(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"name": "t", "family": "uniform_sparse", "mode": "budget", "n": [4, 5],
                               "s": [2], "samples": 2, "seed": 1}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", str(cfg), "-o", str(a), "--report", str(tmp_path / "r.json")]) == 0
    assert main(["sweep", "--config", str(cfg), "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert json.loads((tmp_path / "r.json").read_text())["bound_violations"] == 0
    assert main(["sweep", "positive_thresholded", "--config", str(cfg), "-o", str(a)]) == EXIT_USAGE
    assert main(["sweep", "nosuch", "-o", str(a)]) == EXIT_ERROR


def test_entry_point():
    out = subprocess.run([sys.executable, "-m", "fablekit.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for sub in ("generate", "encode", "verify", "sweep", "counts"):
        assert sub in out.stdout
