import io
import json
import subprocess
import sys

import pytest

from shrinkage_priors.cli import fmt, main


def run(argv, stdin=""):
    """Call main with captured streams; returns (status, stdout, stderr)."""
    old = sys.stdin, sys.stdout, sys.stderr
    sys.stdin, sys.stdout, sys.stderr = io.StringIO(stdin), io.StringIO(), io.StringIO()
    try:
        status = main(argv)
        return status, sys.stdout.getvalue(), sys.stderr.getvalue()
    finally:
        sys.stdin, sys.stdout, sys.stderr = old


def body(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


class TestFormatting:
    @pytest.mark.parametrize("value,text", [
        (0.0, "0"), (-0.0, "0"), (1 / 3, "0.333333333333333"), (12, "12"),
        (True, "true"), (float("inf"), "inf"), (1e-20, "1e-20"),
    ])
    def test_fmt(self, value, text):
        assert fmt(value) == text


class TestPriors:
    def test_list(self):
        status, out, _ = run(["priors", "list"])
        assert status == 0
        lines = body(out)
        assert lines[0] == "name,a,K,M,c0,t0,nondecreasing,in_theorem_range"
        assert lines[1].startswith("horseshoe,0.5,0.318309886183791,1,0.5,1,true,true")
        assert len(lines) == 7


class TestEstimate:
    def test_anchor_row(self):
        status, out, _ = run(["estimate", "--prior", "horseshoe", "--tau", "1", "--in", "-"], "0\n")
        assert status == 0
        lines = body(out)
        assert lines[0] == "x,t_tau,post_var,identity_gap"
        assert lines[1].startswith("0,0,0.333333333333333,")

    def test_header_echoes_config(self):
        _, out, _ = run(["estimate", "--tau", "0.5"], "1\n")
        header = json.loads(out.splitlines()[0][2:])
        assert header["config"]["tau"] == 0.5 and header["config"]["prior"] == "horseshoe"

    def test_bad_input(self):
        status, _, err = run(["estimate", "--tau", "1"], "abc\n")
        assert status == 2 and "not a number" in err

    def test_missing_tau(self):
        status, _, err = run(["estimate"], "1\n")
        assert status == 2

    def test_file_io(self, tmp_path):
        src = tmp_path / "x.txt"
        src.write_text("1\n-2\n\n3.5\n")
        dst = tmp_path / "out.csv"
        assert run(["estimate", "--tau", "0.1", "--in", str(src), "--out", str(dst)])[0] == 0
        first = dst.read_bytes()
        assert len(body(first.decode())) == 4
        run(["estimate", "--tau", "0.1", "--in", str(src), "--out", str(dst)])
        assert dst.read_bytes() == first


class TestVerify:
    def test_gap_suite(self):
        status, out, _ = run(["verify-bounds", "--prior", "horseshoe", "--suite", "gap",
                              "--tau-grid", "0.1,0.01", "--x-grid", "-10:10:0.1"])
        assert status == 0
        lines = body(out)
        assert lines[0] == "suite,tau,x_or_y,lhs,rhs,margin,pass"
        assert len(lines) == 1 + 2 * 201
        assert all(line.endswith(",true") for line in lines[1:])

    def test_failure_exits_one(self, monkeypatch):
        import shrinkage_priors.cli as cli

        monkeypatch.setattr(cli, "check_suite",
                            lambda *a, **k: [("moment", 0.1, 0.0, 2.0, 1.0, -1.0, False)])
        assert run(["verify-bounds", "--suite", "moment"])[0] == 1

    def test_precondition_is_usage_error(self):
        status, _, err = run(["verify-bounds", "--prior", "neg", "--suite", "ik"])
        assert status == 2 and "a = 1/2" in err

    def test_bad_grid(self):
        assert run(["verify-bounds", "--suite", "gap", "--x-grid", "1:0:0.1"])[0] == 2

    def test_missing_suite(self):
        assert run(["verify-bounds"])[0] == 2


class TestExperiments:
    def test_risk_json_keys(self, tmp_path):
        out = tmp_path / "r.json"
        csv_path = tmp_path / "r.csv"
        status, _, _ = run(["risk", "--n", "60", "--p", "3", "--signal", "6", "--reps", "3",
                            "--seed", "11", "--out", str(out), "--csv", str(csv_path)])
        assert status == 0
        doc = json.loads(out.read_text())
        assert set(doc["report"]) == {"n", "p", "tau", "mc_risk", "mc_se", "minimax_ratio",
                                      "thm31_ratio", "thm32_ratio", "thm35_ratio"}
        assert doc["header"]["seed"] == 11
        assert len(body(csv_path.read_text())) == 1 + 3

    def test_config_file_and_precedence(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"n": 50, "p": 2, "reps": 2, "seed": 5, "tau-rule": "fixed:0.2"}))
        _, out, _ = run(["risk", "--config", str(cfg), "--seed", "6"])
        doc = json.loads(out)
        assert doc["report"]["n"] == 50 and doc["report"]["tau"] == 0.2
        assert doc["header"]["seed"] == 6

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        assert run(["risk", "--config", str(cfg)])[0] == 2

    def test_contract_and_scaling(self):
        status, out, _ = run(["contract", "--n", "40", "--p", "2", "--reps", "2",
                              "--radius", "0,1e6", "--seed", "3"])
        assert status == 0
        rep = json.loads(out)["report"]
        assert rep["prob_theta0"] == [1.0, 0.0]
        status, out, _ = run(["scaling", "--n-list", "50,100", "--gamma", "0.3", "--reps", "2"])
        assert status == 0
        assert len(json.loads(out)["report"]["rows"]) == 2

    def test_bad_tau_rule(self):
        assert run(["risk", "--tau-rule", "magic"])[0] == 2

    def test_usage_error(self):
        status, _, err = run(["risk", "--nope"])
        assert status == 2 and "usage" in err
        assert run([])[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "shrinkage_priors", "priors", "list"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "horseshoe" in proc.stdout
