import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from delayhinf import cli
from delayhinf.errors import ConvergenceError

DATA = Path(__file__).resolve().parents[1] / "data"
G12 = str(DATA / "g12.json")


@pytest.fixture
def unstable(tmp_path):
    p = tmp_path / "unstable.json"
    p.write_text(json.dumps({"n": 1, "m": 1, "A": [[[0.0]], [[1.0]]], "B": [[1.0]],
                             "C": [[1.0]], "D": [[0.0]], "tau": [0.0, 1.0]}))
    return str(p)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_norm_json(capsys):
    code, out, _ = run(capsys, "norm", G12, "--N", "18")
    assert code == 0
    d = json.loads(out)
    assert list(d) == ["hinf", "peak_omega", "predicted", "N", "candidates", "warnings"]
    assert abs(d["hinf"] - 1.1696) < 1e-3
    assert d["N"] == 18
    from delayhinf import compute_hinf, g12_system

    assert d["predicted"] == float(f"{compute_hinf(g12_system(), N=18).predicted_norm:.12g}")


def test_norm_is_byte_deterministic(capsys, tmp_path):
    _, a, _ = run(capsys, "norm", G12)
    _, b, _ = run(capsys, "norm", G12)
    assert a == b
    run(capsys, "norm", G12, "--out", str(tmp_path / "r.json"))
    assert (tmp_path / "r.json").read_text() == a


def test_unstable_exit_4(capsys, unstable):
    code, out, err = run(capsys, "norm", unstable)
    assert code == 4 and out == ""
    assert err.startswith("instability:") and "rightmost root estimate 0.567" in err


@pytest.mark.parametrize("argv", [
    ["norm", G12, "--tol", "0.5"],
    ["norm", G12, "--tol", "0"],
    ["norm", G12, "--N", "61"],
    ["norm", G12, "--N", "0"],
    ["norm", G12, "--N", "5", "--omega-c", "10"],
    ["norm", "/nonexistent.json"],
    ["cutoff-table", "--nmax", "99"],
    ["svplot", G12, "--omega-max", "10", "--points", "1"],
    ["frobnicate"],
    [],
])
def test_input_errors_exit_2(capsys, argv):
    code = None
    try:
        code = cli.main(argv)
    except SystemExit as e:
        code = e.code
    err = capsys.readouterr().err
    assert code == 2
    assert "input" in err or "parse" in err or "error" in err


def test_parse_error_category(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"n": 1}')
    code, _, err = run(capsys, "norm", str(p))
    assert code == 2 and err.startswith("parse:")


def test_unreachable_cutoff_target(capsys):
    code, _, err = run(capsys, "norm", G12, "--omega-c", "1e6")
    assert code == 2 and err.startswith("unreachable-target:")


def test_numerical_error_exit_3(capsys, monkeypatch):
    def boom(*a, **k):
        raise ConvergenceError("level-set iteration did not terminate")

    monkeypatch.setattr(cli, "compute_hinf", boom)
    code, _, err = run(capsys, "norm", G12)
    assert code == 3 and err.startswith("convergence:")


def test_svplot(capsys, tmp_path):
    code, out, _ = run(capsys, "svplot", G12, "--omega-max", "100", "--points", "50")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "omega,sigma1" and len(lines) >= 48
    run(capsys, "svplot", G12, "--omega-max", "100", "--points", "50", "--all",
        "--out", str(tmp_path / "sv.csv"))
    assert (tmp_path / "sv.csv").read_text().splitlines()[0] == "omega,sigma1,sigma2"


def test_levelset_trace(capsys):
    code, out, _ = run(capsys, "levelset-trace", G12, "--N", "18")
    assert code == 0
    recs = [json.loads(line) for line in out.splitlines()]
    assert recs[-1]["crossings"] == []
    xs = [r["xi"] for r in recs]
    assert xs == sorted(xs)
    assert len(recs[0]["midpoints"]) == len(recs[0]["lambda1_values"])


def test_cutoff_table(capsys):
    code, out, _ = run(capsys, "cutoff-table", "--delta", "0.1", "--nmax", "10")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "N,delta,omega_c"
    assert len(lines) == 11
    n8 = lines[8].split(",")
    assert n8[0] == "8" and float(n8[2]) > 10


def test_bench(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("DELAY_HINF_THREADS", "1")
    shutil.copy(G12, tmp_path / "g12.json")
    code, out, _ = run(capsys, "bench", str(tmp_path), "--N", "18")
    assert code == 0
    head, row = out.splitlines()
    assert head.split() == ["plant", "n", "m", "N", "xi_pred", "xi_corr"]
    f = row.split()
    assert f[:4] == ["g12", "3", "2", "18"]
    assert abs(float(f[5]) - 1.1696) < 1e-3


def test_bench_reports_failures(capsys, tmp_path, unstable):
    shutil.copy(G12, tmp_path / "g12.json")
    shutil.copy(unstable, tmp_path / "zz.json")
    code, out, err = run(capsys, "bench", str(tmp_path))
    assert code == 4
    assert "zz" in out and "instability" in out
    assert "g12" in out


def test_dumps_format():
    s = cli.dumps({"b": 1.0 / 3.0, "a": [float("inf"), -0.0, 2, True, None, "x"]})
    assert s == '{"b": 0.333333333333, "a": [null, 0, 2, true, null, "x"]}'


def test_entry_point():
    exe = shutil.which("delay-hinf")
    cmd = [exe] if exe else [sys.executable, "-m", "delayhinf.cli"]
    p = subprocess.run(cmd + ["cutoff-table", "--nmax", "3"], capture_output=True, text=True)
    assert p.returncode == 0 and p.stdout.startswith("N,delta,omega_c")
