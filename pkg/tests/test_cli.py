import json
import subprocess
import sys

import pytest

from bcnfchaos.cli import main


@pytest.fixture
def files(tmp_path):
    def write(name, obj):
        p = tmp_path / name
        p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
        return str(p)

    return write


CONVERTER = {"lambda1": -0.977, "lambda2": -0.232, "q": 35.606, "theta": 4.2,
             "alpha": 70.0, "omega": 5.45}
SAMPLE = {"tau_L": 1.4, "delta_L": 1.0, "tau_R": 1.15, "delta_R": 1.15}


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check(files, capsys):
    code, out, _ = run(["check", "--params", files("c.json", CONVERTER)], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["overall"] and rep["i_max"] == 1000
    code, out, _ = run(["check", "--params", files("c.json", CONVERTER), "--i-max", "500"], capsys)
    assert json.loads(out)["i_max"] == 500


@pytest.mark.parametrize("text", ["{", '{"tau_L": 1}', "[1, 2]", '{"tau_L": "x", "delta_L": 1, "tau_R": 1, "delta_R": 1}'])
def test_malformed_input(files, capsys, text):
    code, out, err = run(["check", "--params", files("bad.json", text)], capsys)
    assert code == 2 and err.startswith("error:") and out == ""


def test_missing_file_and_bad_flags(capsys):
    assert run(["check", "--params", "/nonexistent.json"], capsys)[0] == 2
    assert run(["nope"], capsys)[0] == 2
    assert run(["plane", "--side", "L"], capsys)[0] == 2


def test_profile(files, capsys):
    code, out, _ = run(["profile", "--params", files("f.json", SAMPLE), "--lines", "3",
                        "--covering", "500"], capsys)
    d = json.loads(out)
    assert code == 0 and (d["p_star"], d["q_star"], d["q_star2"]) == (3, 3, 5)
    assert len(d["lines_L"]) == 3
    assert d["covering"]["L"]["ok"] and d["covering"]["R"]["ok"]


def test_plane(tmp_path, capsys):
    out = tmp_path / "p.csv"
    code = main(["plane", "--side", "L", "--tau=-3:3", "--delta", "0:2",
                 "--resolution", "300", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 90000
    out_r = tmp_path / "r.csv"
    assert main(["plane", "--side", "R", "--tau", "1:3", "--delta", "1:2",
                 "--resolution", "5", "--out", str(out_r)]) == 0
    header = out_r.read_text().splitlines()[0].split(",")
    assert header == ["tau", "delta", "q_star", "q_star2", "cond3"]
    assert main(["plane", "--side", "L", "--tau", "0:1", "--delta", "0:1",
                 "--resolution", "1", "--out", str(out)]) == 2


def test_cone(files, capsys):
    p = files("c.json", CONVERTER)
    code, out, _ = run(["cone", "--params", p, "--bounds", "6,8,2,3"], capsys)
    d = json.loads(out)
    assert code == 0 and d["c"] > 1.01
    assert abs(d["theta0"] - 0.8062) < 0.05 and abs(d["theta1"] - 2.0227) < 0.05
    code, out, _ = run(["cone", "--params", p, "--bounds", "6,8,2,3", "--theta", "0:0.1"], capsys)
    assert code == 1 and not json.loads(out)["contracting_invariant"]
    assert run(["cone", "--params", p], capsys)[0] == 2


def test_certify_failed_conditions(files, capsys):
    p = files("bad.json", {"tau_L": 1.4, "delta_L": 1.0, "tau_R": 2.0, "delta_R": 0.5})
    code, out, _ = run(["certify", "--params", p], capsys)
    d = json.loads(out)
    assert code == 1 and d["verdict"] == "FAILED"
    assert not d["conditions"]["overall"] and d["trapping"] is None


def test_certify_sample_profile(files, capsys):
    code, out, _ = run(["certify", "--params", files("f.json", SAMPLE)], capsys)
    d = json.loads(out)
    assert (d["profile"]["p_star"], d["profile"]["q_star"], d["profile"]["q_star2"]) == (3, 3, 5)
    assert d["verdict"] != "CERTIFIED" and code == 1


def test_certify_converter(tmp_path, capsys):
    reg = tmp_path / "region.json"
    code, out, _ = run(["certify", "--converter", "--omega-at-bcb", "--region-out", str(reg)], capsys)
    d = json.loads(out)
    assert code == 0 and d["verdict"] == "CERTIFIED"
    assert d["pq_bounds"] == [6, 8, 2, 3]
    assert abs(d["cone"]["theta0"] - 0.8062) < 0.05 and abs(d["cone"]["theta1"] - 2.0227) < 0.05
    assert d["trapping"]["margin"] > 0 and d["lyapunov_lower_bound"] > 0
    assert d["region"] == {"path": str(reg)}
    assert not any("differ from the reference" in n for n in d["notes"])
    # certifying the saved region reproduces the verdict
    code, out2, _ = run(["certify", "--converter", "--region", str(reg)], capsys)
    assert code == 0 and json.loads(out2)["pq_bounds"] == [6, 8, 2, 3]


def test_region_command(files, tmp_path, capsys):
    csv_path = tmp_path / "r.csv"
    code, out, _ = run(["region", "--params", files("c.json", CONVERTER), "--csv", str(csv_path),
                        "--samples", "0"], capsys)
    d = json.loads(out)
    assert code == 0 and d["is_trapping"] and d["pieces"] > 1
    assert csv_path.read_text().startswith("polygon,x1,x2\n")


def test_deterministic(tmp_path, files):
    p = files("f.json", SAMPLE)
    outs = []
    for k in range(2):
        o = tmp_path / f"o{k}.json"
        main(["profile", "--params", p, "--covering", "300", "--seed", "7", "--out", str(o)])
        outs.append(o.read_bytes())
        c = tmp_path / f"b{k}.csv"
        main(["converter", "bifurcation", "--omega", "5.40:5.50:4", "--iters", "3000",
              "--transient", "500", "--threads", str(k + 1), "--out", str(c)])
        outs.append(c.read_bytes())
    assert outs[0] == outs[2] and outs[1] == outs[3]


def test_converter_subcommands(tmp_path, capsys):
    a = tmp_path / "a.csv"
    assert main(["converter", "attractor", "--omega", "5.45", "--n", "500", "--discard", "100",
                 "--out", str(a)]) == 0
    assert a.read_text().splitlines()[0] == "w1,w2" and len(a.read_text().splitlines()) == 501
    t = tmp_path / "t.csv"
    assert main(["converter", "timeseries", "--omega", "5.9", "--intervals", "30",
                 "--out", str(t)]) == 0
    assert t.read_text().splitlines()[0] == "t,X,Y,xi,eta,H"
    capsys.readouterr()
    code, out, _ = run(["converter", "lyapunov", "--omega", "5.35", "--n", "5000"], capsys)
    assert code == 0 and json.loads(out)["lyapunov"] < 0
    assert main(["converter", "bifurcation", "--omega", "5.4:5.5"]) == 2


def test_entry_point(files):
    r = subprocess.run([sys.executable, "-m", "bcnfchaos", "check", "--params", files("f.json", SAMPLE)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["overall"] is True
