import json
import subprocess
import sys

import pytest

from lastsuccess import cli, logseries
from lastsuccess.exceptions import QuadratureError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _header_ok(text):
    first = text.splitlines()[0]
    assert first.startswith("# quantity=") and " tol=" in first


@pytest.mark.parametrize("argv", [
    ["discrete", "--profile", "records", "--n", "12"],
    ["discrete", "--profile", "explicit:0.5,0.25,0.2", "--n", "3"],
    ["bernstein", "--profile", "records", "--n", "50", "--k", "0", "--grid", "11"],
    ["cutoffs", "--prior", "logseries:0.9", "--profile", "records", "--kmax", "5"],
    ["cutoffs", "--prior", "negbin:2,0.8", "--profile", "karamata:0.5", "--kmax", "3", "--q", "0.5"],
    ["logseries-roots", "--kmax", "3"],
    ["hyp-selftest"],
    ["value", "--q", "0.9", "--kmax", "100", "--step", "1e-3", "--xmax", "0.8", "--kout", "3", "--dx", "0.1"],
])
def test_csv_commands(capsys, argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    _header_ok(out)
    code2, out2, _ = run(capsys, *argv)
    assert code2 == 0 and out2 == out


def test_json_output(capsys):
    code, out, _ = run(capsys, "cutoffs", "--prior", "geometric:0.5", "--profile", "records", "--kmax", "4",
                       "--out", "json")
    doc = json.loads(out)
    assert code == 0 and doc["quantity"] and doc["tol"]
    assert doc["columns"] == ["k", "alpha", "beta", "a", "b"] and len(doc["rows"]) == 4
    code, out, _ = run(capsys, "montest", "--prior", "logseries:1", "--profile", "records", "--kmax", "5")
    doc = json.loads(out)
    assert code == 0 and doc["monotone"] is False and doc["witness"] == 1


def test_table1_byte_identical(tmp_path):
    paths = [tmp_path / f"t{i}.csv" for i in range(2)]
    for p in paths:
        assert cli.main(["table1", "--step", "1e-3", "--kmax", "100", "-o", str(p)]) == 0
    a, b = (p.read_bytes() for p in paths)
    assert a == b
    lines = a.decode().splitlines()
    assert lines[0].startswith("# quantity=") and lines[1] == "k,alpha,beta,gamma,rho"
    assert [ln.split(",")[0] for ln in lines[2:]] == ["1", "2", "3", "4", "5", "10"]


def test_bernstein_svg(tmp_path, capsys):
    svg = tmp_path / "s.svg"
    code, out, _ = run(capsys, "bernstein", "--profile", "records", "--n", "20", "--svg", str(svg))
    assert code == 0 and "<polyline" in svg.read_text()
    assert "mode_z=" in out


def test_simulate_json(capsys):
    argv = ["simulate", "--strategy", "bygone", "--strategy", "myopic", "--prior", "logseries:0.9",
            "--profile", "records", "--t", "0.2", "--k", "2", "--paths", "20000", "--seed", "4", "--crn"]
    code, out, _ = run(capsys, *argv)
    docs = json.loads(out)
    assert code == 0 and len(docs) == 2
    assert all(d["trials"] == 20000 and d["quantity"] and d["tol"] for d in docs)
    assert run(capsys, *argv)[1] == out


@pytest.mark.parametrize("argv", [
    ["simulate", "--strategy", "z:0.36x79", "--prior", "logseries:0.9", "--profile", "records"],
    ["simulate", "--strategy", "bygone", "--prior", "logseries:0.9", "--profile", "records", "--paths", "0"],
    ["simulate", "--strategy", "bygone", "--prior", "logseries:0.9", "--profile", "records", "--t", "0.1",
     "--k", "-1"],
    ["cutoffs", "--prior", "poisson:3", "--profile", "records"],
    ["cutoffs", "--prior", "geometric:1.5", "--profile", "records"],
    ["discrete", "--profile", "karamata:abc", "--n", "5"],
    ["discrete", "--profile", "explicit:0.5,0.5", "--n", "5"],
    ["bernstein", "--profile", "records", "--n", "5", "--grid", "1"],
])
def test_validation_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err


def test_argparse_errors_exit_2(capsys):
    for argv in (["nosuch"], ["simulate", "--strategy", "bygone", "--prior", "logseries:0.9",
                              "--profile", "records", "--t", "1.5"]):
        with pytest.raises(SystemExit) as exc:
            cli.main(argv)
        assert exc.value.code == 2
    capsys.readouterr()


def test_numerical_failure_exit_3(capsys, monkeypatch):
    def boom(k):
        raise QuadratureError("forced", 1e-10)
    monkeypatch.setattr(logseries, "rho_balance", boom)
    code, _, err = run(capsys, "logseries-roots", "--kmax", "2")
    assert code == 3 and "tolerance 1e-10" in err


def test_truncation_failure_exit_3(capsys):
    # K_max = 50 cannot reach the grid tolerance within two doublings
    code, out, err = run(capsys, "value", "--q", "0.9", "--kmax", "50", "--step", "1e-3", "--xmax", "0.8")
    assert code == 3 and "tolerance" in err and out == ""


def test_help_documents_defaults():
    out = subprocess.run([sys.executable, "-m", "lastsuccess.cli", "simulate", "--help"],
                         capture_output=True, text=True, check=True).stdout
    assert "default" in out and "--crn" in out
