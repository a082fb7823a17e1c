import csv
import io
import json
import shutil
import subprocess

import jsonschema
import pytest

from wedge import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def validate(text, name):
    data = json.loads(text)
    jsonschema.validate(data, cli.load_schema(name))
    return data


def test_classify(capsys):
    code, out, _ = run(capsys, "classify", "--eps", "0.5", "--delta", "1", "--R", "0.6667")
    assert code == 0
    data = validate(out, "classify")
    assert data["case"] == "1AbIIii" and data["wellposedness"] == "Unconditional"
    code, out, _ = run(capsys, "classify", "--eps", "-1", "--delta", "1", "--R", "2")
    assert code == 0 and json.loads(out)["case"] == "2B"


def test_classify_boundary_and_bad_input(capsys):
    code, out, err = run(capsys, "classify", "--eps", "0", "--delta", "1", "--R", "0.5")
    assert code == 3 and validate(out, "error")["error"] == "BoundaryCase"
    assert err.startswith("wedge:")
    code, out, _ = run(capsys, "classify", "--eps", "0.5", "--delta", "-1", "--R", "0.5")
    assert code == 2
    code, out, _ = run(capsys, "classify", "--eps", "0.5", "--delta", "1", "--R", "1")
    assert code == 2


def test_solve_writes_files(capsys, tmp_path):
    code, out, _ = run(capsys, "solve", "--eps", "0.5", "--delta", "1", "--R", str(2 / 3),
                       "--xi", "0.1", "--out", str(tmp_path))
    assert code == 0
    data = validate((tmp_path / "wedge.json").read_text(), "wedge")
    assert 0 < data["q_star"] < 0.75 < data["q_upper"] < 1
    assert json.loads(out) == data
    rows = list(csv.reader(io.StringIO((tmp_path / "value.csv").read_text())))
    assert rows[0] == ["q", "p", "n", "m", "ell", "G", "C_coeff"]
    assert len(rows) == 2049


def test_solve_is_byte_deterministic(capsys, tmp_path):
    args = ["solve", "--eps", "1.5", "--delta", "1", "--R", str(2 / 3), "--lam", "0.3",
            "--gamma", "0.1"]
    run(capsys, *args, "--out", str(tmp_path / "a"))
    run(capsys, *args, "--out", str(tmp_path / "b"))
    for f in ("wedge.json", "value.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_solve_ill_posed_exit_codes(capsys, tmp_path):
    code, out, _ = run(capsys, "solve", "--eps", "17.5", "--delta", "6", "--R", str(2 / 3),
                       "--xi", "1", "--out", str(tmp_path))
    assert code == 5 and validate(out, "error")["error"] == "IllPosedAlways"
    code, out, _ = run(capsys, "solve", "--eps", "13.5", "--delta", "6", "--R", str(2 / 3),
                       "--xi", "0.2", "--out", str(tmp_path))
    data = validate(out, "error")
    assert code == 4 and data["xi_under"] == pytest.approx(0.40322914220515393, rel=1e-12)
    assert "0.403229" in data["message"]


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"eps": 0.5, "delta": 1.0, "R": 0.6, "xi": 0.05}))
    code, out, _ = run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 0
    # flags override the file
    code, out, _ = run(capsys, "classify", "--config", str(cfg), "--eps", "-1")
    assert json.loads(out)["case"] == "1Bii"
    cfg.write_text(json.dumps({"eps": 0.5, "bogus": 1}))
    code, out, _ = run(capsys, "classify", "--config", str(cfg))
    assert code == 2 and json.loads(out)["error"] == "ConfigInvalid"


def test_curves(capsys):
    code, out, _ = run(capsys, "curves", "--eps", "0.5", "--delta", "1", "--R", str(2 / 3),
                       "--r", "0.1,0.2,0.3,0.4,0.5,0.6,0.7")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and {r["r"] for r in rows} == {f"{v:.17g}" for v in
                                                    (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)}
    assert {r["status"] for r in rows} == {"ok"}
    code, out, _ = run(capsys, "curves", "--eps", "17.5", "--delta", "6", "--R", str(2 / 3),
                       "--r", "0.05,0.2")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert {r["status"] for r in rows} == {"HitZero"}
    code, out, _ = run(capsys, "curves", "--eps", "0.5", "--delta", "1", "--R", "0.6", "--r", "")
    assert code == 0 and out == "r,q,n,m,ell,status\n"


def test_sweep_marks_rows(capsys):
    code, out, err = run(capsys, "sweep", "--eps", "13.5", "--delta", "6", "--R", str(2 / 3),
                         "--grid", "0.2,0.6,1.0")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["status"] for r in rows] == ["IllPosedForThisXi", "ok", "ok"]
    assert "q_upper non-decreasing" in err


def test_sweep_singular_plateau(capsys):
    code, out, _ = run(capsys, "sweep", "--eps", "1.5", "--delta", "1", "--R", str(2 / 3),
                       "--grid", "1.0,2.0,3.0")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len({r["q_upper"] for r in rows}) == 1


def test_sweep_drift_axis(capsys):
    code, out, _ = run(capsys, "sweep", "--axis", "eps", "--delta", "1", "--R", str(2 / 3),
                       "--lam", "0.05", "--gamma", "0.05", "--grid", "0,0.1,0.3")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and rows[0]["status"].startswith("Boundary")


def test_simulate_repeatable(capsys):
    args = ["simulate", "--mu", "0.25", "--sigma", str(0.5 ** 0.5), "--beta", "0.5",
            "--R", str(2 / 3), "--lam", "0.05", "--gamma", "0.05", "--paths", "20",
            "--dt", "0.01", "--horizon", "1", "--seed", "5"]
    code, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert code == 0 and a == b
    data = validate(a, "simulate")
    assert data["result"]["insolvency_count"] == 0


def test_missing_command(capsys):
    assert cli.main([]) == 2


@pytest.mark.skipif(shutil.which("wedge") is None, reason="console script not installed")
def test_console_script():
    out = subprocess.run(["wedge", "classify", "--eps", "-3", "--delta", "1", "--R", str(2 / 3)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and json.loads(out.stdout)["case"] == "1Bi"
