import csv
import json
import subprocess
import sys

import pytest

from credal_lln.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_bound_wlln(capsys):
    code, out, _ = run(capsys, "bound", "--formula", "thm3-wlln", "--n", "200", "--eps", "0.1", "--bmax", "1")
    data = json.loads(out)
    assert code == 0 and data["value"] == pytest.approx(0.963369, abs=5e-7)
    assert data["provenance"]["config"]["formula"] == "thm3-wlln"
    assert "version" in data["provenance"]


def test_bound_threshold(capsys):
    code, out, _ = run(capsys, "bound", "--formula", "thm4-slln-N", "--eps", "0.1", "--sigma2", "1",
                       "--delta", "0.5", "--json")
    assert code == 0 and json.loads(out)["threshold"] == 1251


@pytest.mark.parametrize("argv", [
    ["bound", "--formula", "nope", "--eps", "1"],
    ["bound", "--formula", "thm3-wlln", "--eps", "0.1"],
    ["bound", "--formula", "thm1", "--eps", "-1", "--n", "3", "--bmax", "1"],
    ["verify", "--formula", "markov", "--spec", "binary-credal"],
    ["verify", "--formula", "thm3-wlln", "--eps", "0.1", "--spec", "no-such-spec"],
    ["verify", "--formula", "thm3-wlln", "--eps", "0.1", "--spec", "binary-credal", "--strategy", "BOGUS"],
    ["example1", "--delta", "0.3", "--eps", "0.9"],
])
def test_input_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "error" in err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["bound"])
    assert exc.value.code == 2


def test_bound_writes_file(capsys, tmp_path):
    out = tmp_path / "b.json"
    run(capsys, "bound", "--formula", "khr", "--moments", "0.01,0.01", "--eps-list", "1,1", "--out", str(out))
    assert json.loads(out.read_text())["value"] == pytest.approx(0.98)


def test_simulate_trajectory_csv(capsys, tmp_path):
    out = tmp_path / "traj.csv"
    code, stdout, _ = run(capsys, "simulate", "--spec", "pm1-fair", "--n", "5", "--trials", "20",
                          "--seed", "3", "--strategy", "GREEDY_UP,IID_MIX(1.0)", "--out", str(out))
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["strategy", "trial", "step", "x", "m", "y"]
    assert len(rows) == 2 * 20 * 5
    # y telescopes
    first = [r for r in rows if r["strategy"] == "GREEDY_UP" and r["trial"] == "0"]
    acc = 0.0
    for r in first:
        acc += float(r["x"]) - float(r["m"])
        assert float(r["y"]) == pytest.approx(acc, abs=1e-12)
    summary = json.loads(stdout)
    assert [s["strategy"] for s in summary["strategies"]] == ["GREEDY_UP", "IID_MIX(1.0)"]


def test_spec_from_json_file(capsys, tmp_path):
    spec = {"n": 3, "step": {"type": "credal", "space": [0, 1], "extremes": [[0.4, 0.6], [0.2, 0.8]]}}
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    code, out, err = run(capsys, "simulate", "--spec", str(path), "--trials", "10")
    assert code == 0, err
    assert json.loads(out)["spec"]["n"] == 3


def test_bad_json_spec(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, _, _ = run(capsys, "simulate", "--spec", str(path))
    assert code == 2


def test_verify_pass_and_outputs(capsys, tmp_path):
    out = tmp_path / "v.csv"
    code, stdout, _ = run(capsys, "verify", "--formula", "thm3-wlln", "--eps", "0.3", "--spec", "binary-credal",
                          "--n", "10", "--trials", "2000", "--seed", "1", "--out", str(out))
    assert code == 0 and json.loads(stdout)["verdict"] == "PASS"
    header = out.read_text().splitlines()[0]
    assert header.startswith("formula_id,event,strategy,side,bound")
    assert json.loads(out.with_suffix(".json").read_text())["records"][0]["dp"]["lower"] is not None


def test_verify_fail_exit_1(capsys):
    # zero second moments claim coverage 1, which the +-1 walk cannot meet
    code, stdout, _ = run(capsys, "verify", "--formula", "khr", "--spec", "pm1-fair", "--n", "3",
                          "--eps-list", "1.5,1.5,1.5", "--moments", "0,0,0", "--trials", "2000")
    assert code == 1 and json.loads(stdout)["verdict"] == "FAIL"


def test_verify_is_byte_reproducible(capsys, tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        run(capsys, "verify", "--formula", "thm1", "--eps", "2", "--spec", "binary-credal", "--n", "20",
            "--trials", "3000", "--seed", "9", "--out", str(p))
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_verify_slln_window(capsys):
    code, stdout, _ = run(capsys, "verify", "--formula", "thm3-slln-N", "--eps", "0.5", "--spec",
                          "binary-credal", "--n", "12", "--trials", "2000")
    rec = json.loads(stdout)["records"][0]
    assert code == 0 and rec["event"]["N"] == 4 and rec["event"]["Nprime"] == 8


def test_example1_csv(capsys, tmp_path):
    out = tmp_path / "ex.csv"
    code, stdout, _ = run(capsys, "example1", "--delta", "0.3", "--epsilon", "0.1",
                          "--n-grid", "10,100,10000", "--out", str(out))
    assert code == 0 and json.loads(stdout)["verdict"] == "PASS"
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["n", "P1", "P2", "P3", "lower"]
    assert float(rows[-1]["lower"]) == pytest.approx(0.7, abs=0.005)


def test_check_named_spec(capsys):
    code, stdout, _ = run(capsys, "check", "--spec", "ternary-credal", "--n", "3")
    data = json.loads(stdout)
    assert code == 0 and data["verdict"] == "PASS"
    assert {c["check"] for c in data["checks"]} == {
        "martingale", "second-moment", "khr", "disintegrability", "factorization"}


def test_cap_env_var(capsys, monkeypatch):
    monkeypatch.setenv("CREDAL_LLN_CAP", "10")
    code, _, err = run(capsys, "check", "--spec", "binary-credal", "--n", "6")
    assert code == 2 and "cap" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "credal_lln", "bound", "--formula", "markov",
                          "--expectation", "1", "--eps", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["value"] == 0.5
