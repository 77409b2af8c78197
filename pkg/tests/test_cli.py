import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from sectoria import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr().out
    return code, out


def strip_timestamp(text: str) -> dict:
    d = json.loads(text)
    d.pop("timestamp")
    return d


class TestExitCodes:
    def test_certify_positive_diagonal(self, capsys):
        code, out = run(["certify", "--family", "positive_diagonal:1,2,3"], capsys)
        rep = json.loads(out)
        assert code == 0 and rep["pass"]
        assert rep["reports"][0]["constants"]["omega_est"] < 0.02

    def test_certify_jordan_with_theta(self, capsys):
        code, out = run(["certify", "--family", "jordan_shifted:2,1,1", "--theta", "1.2"], capsys)
        c = json.loads(out)["reports"][0]["constants"]["c_theta"]
        assert code == 0 and np.isfinite(c)

    def test_nonsquare_matrix(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"dim": 2, "entries": [[1, 0], [0, 0], [0, 0]]}))
        assert cli.main(["certify", "--matrix", str(bad)]) == 2

    def test_missing_file_and_bad_flags(self, capsys):
        assert cli.main(["certify", "--matrix", "/nonexistent/m.json"]) == 2
        assert cli.main(["certify"]) == 2
        assert cli.main(["certify", "--family", "positive_diagonal:1", "--matrix", "x.json"]) == 2
        assert cli.main(["frobnicate"]) == 2
        assert cli.main(["calc", "--family", "positive_diagonal:1", "--symbol", "nope"]) == 2
        assert cli.main(["model", "--family", "positive_diagonal:1", "--alpha", "-1"]) == 2

    def test_check_failure_exits_one(self, capsys):
        # a theta below the spectrum cannot be certified
        code, out = run(["certify", "--family", "complex_diagonal:1@1.0", "--theta", "0.5"], capsys)
        assert code == 1
        assert json.loads(out)["pass"] is False

    def test_calc_examples(self, capsys):
        code, out = run(["calc", "--symbol", "z_pow:0.5", "--family", "positive_diagonal:4,9"], capsys)
        val = json.loads(out)["reports"][0]["constants"]["value"]
        assert code == 0
        assert val[0][0]["re"] == pytest.approx(2) and val[1][1]["re"] == pytest.approx(3)
        code, out = run(["calc", "--symbol", "log", "--family", "positive_diagonal:1"], capsys)
        assert code == 0 and abs(json.loads(out)["reports"][0]["constants"]["value"][0][0]["re"]) < 1e-10
        code, out = run(["calc", "--symbol", "z_over_1pz2", "--family", "random_accretive:4", "--tol", "1e-8"], capsys)
        assert code == 0 and json.loads(out)["reports"][0]["residuals"]["error"] < 1e-8

    def test_calc_defective_uses_second_contour(self, capsys):
        code, out = run(["calc", "--symbol", "sqrt_over_1p", "--family", "jordan_shifted:2,1,1"], capsys)
        rep = json.loads(out)["reports"][0]
        assert code == 0 and rep["params"]["oracle"] == "second_contour_angle"


class TestSuites:
    def test_sqnorm(self, capsys):
        code, out = run(["sqnorm", "--family", "jordan_shifted:2,1,2"], capsys)
        rep = json.loads(out)
        assert code == 0
        assert [r["check"] for r in rep["reports"]] == [
            "gram", "psi_independence", "mcintosh_identity", "log_gap", "admissibility"
        ]

    def test_model_reproducible_and_thread_independent(self, tmp_path, monkeypatch, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        argv = ["model", "--family", "random_accretive:3", "--seed", "5", "--theta", "2.2"]
        assert cli.main(argv + ["--out", str(a)]) == 0
        monkeypatch.setenv("SECTORIA_THREADS", "3")
        assert cli.main(argv + ["--out", str(b)]) == 0
        ta, tb = a.read_text(), b.read_text()
        assert strip_timestamp(ta) == strip_timestamp(tb)
        drop = lambda t: "\n".join(l for l in t.splitlines() if '"timestamp"' not in l)
        assert drop(ta) == drop(tb)
        checks = [r["check"] for r in json.loads(ta)["reports"]]
        assert checks[-1] == "boundary_pairing" and "duality" in checks
        assert not list(tmp_path.glob(".sectoria-*"))

    def test_config_file_and_flag_precedence(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"family": "positive_diagonal:4,9", "symbol": "z_pow:0.5", "quad.tol": 1e-10}))
        code, out = run(["calc", "--config", str(cfg)], capsys)
        assert code == 0 and json.loads(out)["reports"][0]["params"]["symbol"] == "z_pow:0.5"
        code, out = run(["calc", "--config", str(cfg), "--symbol", "log"], capsys)
        assert json.loads(out)["reports"][0]["params"]["symbol"] == "log"
        cfg.write_text(json.dumps({"family": {"name": "positive_diagonal", "params": {"values": [2]}}}))
        code, out = run(["certify", "--config", str(cfg)], capsys)
        assert code == 0 and json.loads(out)["operator_spec"]["family"] == "positive_diagonal"

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"famly": "positive_diagonal:1"}))
        assert cli.main(["certify", "--config", str(cfg)]) == 2
        cfg.write_text("{not json")
        assert cli.main(["certify", "--config", str(cfg)]) == 2
        cfg.write_text(json.dumps({"family": "positive_diagonal:1", "tol": -1}))
        assert cli.main(["calc", "--config", str(cfg)]) == 2


class TestSweep:
    def test_empty_range(self):
        assert cli.main(["sweep", "--family", "jordan_shifted", "--param", "eps", "--values", ""]) == 2
        assert cli.main(["sweep", "--family", "jordan_shifted"]) == 2

    def test_eps_sweep_kappa_monotone(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        code = cli.main(
            ["sweep", "--family", "jordan_shifted:2,1,1", "--param", "eps", "--values", "0.5,1,2,4", "--out", str(out)]
        )
        rows = list(csv.DictReader(io.StringIO(out.read_text())))
        assert code == 0
        assert tuple(rows[0].keys()) == cli.CSV_COLUMNS
        kappa = [float(r["kappa"]) for r in rows]
        assert all(a < b for a, b in zip(kappa, kappa[1:]))

    def test_theta_sweep_residuals(self, capsys):
        code, out = run(["sweep", "--family", "random_accretive:3", "--thetas", "1.8,2.2,2.6"], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 3
        assert all(float(r["factorization_residual"]) < 1e-4 for r in rows)
        assert rows[0]["theta"] == "1.8"

    def test_diagonal_family_has_no_scalar_parameter(self):
        assert cli.main(["sweep", "--family", "positive_diagonal:1,2", "--param", "x", "--values", "1,2"]) == 2


def test_console_script_entry_point(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dim": 3, "entries": [[1, 0]]}))
    proc = subprocess.run(
        [sys.executable, "-m", "sectoria", "certify", "--matrix", str(bad)], capture_output=True, text=True
    )
    assert proc.returncode == 2
    assert "invalid input" in proc.stderr
