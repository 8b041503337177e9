import json
import math
from pathlib import Path

import pytest

from toruskit import cli


def write_config(tmp_path, section, body):
    path = tmp_path / "run.ini"
    lines = [f"[{section}]"] + [f"{k} = {v}" for k, v in body.items()]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


SCAN_BODY = {
    "system": "std_map",
    "epsilon": "0.0",
    "eta": "0.1",
    "omega_min": "0.5",
    "omega_max": "1.5",
    "n_points": "5",
    "N": "2048",
}


class TestConfigHandling:
    def test_unknown_key_names_offender(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "scan", dict(SCAN_BODY, bogus="1"))
        rc = cli.main(["scan", "--config", cfg, "--out", str(tmp_path)])
        assert rc == 2
        assert "bogus" in capsys.readouterr().err

    def test_missing_key(self, tmp_path, capsys):
        body = dict(SCAN_BODY)
        del body["epsilon"]
        cfg = write_config(tmp_path, "scan", body)
        rc = cli.main(["scan", "--config", cfg, "--out", str(tmp_path)])
        assert rc == 2
        assert "epsilon" in capsys.readouterr().err

    def test_bad_value(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "scan", dict(SCAN_BODY, epsilon="zero"))
        rc = cli.main(["scan", "--config", cfg, "--out", str(tmp_path)])
        assert rc == 2

    def test_missing_file(self, tmp_path, capsys):
        rc = cli.main(["scan", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path)])
        assert rc == 2


class TestScanCommand:
    def test_identity_csv(self, tmp_path):
        cfg = write_config(tmp_path, "scan", SCAN_BODY)
        out = tmp_path / "art"
        rc = cli.main(["scan", "--config", cfg, "--out", str(out)])
        assert rc == 0
        lines = (out / "scan.csv").read_text().splitlines()
        assert lines[0] == "Omega,omega1,amplitude,relaxed,plateau_suspect"
        assert len(lines) == 6
        for row in lines[1:]:
            cells = row.split(",")
            assert abs(float(cells[0]) - float(cells[1])) < 1e-9
            assert cells[3] == "true"

    def test_reproducible_bytes(self, tmp_path):
        cfg = write_config(tmp_path, "scan", SCAN_BODY)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cli.main(["scan", "--config", cfg, "--out", str(out1), "--seed", "7"])
        cli.main(["scan", "--config", cfg, "--out", str(out2), "--seed", "7"])
        assert (out1 / "scan.csv").read_bytes() == (out2 / "scan.csv").read_bytes()
        assert (out1 / "scan.json").read_bytes() == (out2 / "scan.json").read_bytes()

    def test_json_has_version_and_config(self, tmp_path):
        cfg = write_config(tmp_path, "scan", SCAN_BODY)
        out = tmp_path / "art"
        cli.main(["scan", "--config", cfg, "--out", str(out)])
        payload = json.loads((out / "scan.json").read_text())
        assert payload["format_version"] == 1
        assert payload["config"]["system"] == "std_map"


class TestInvertCommand:
    def test_identity_inversion(self, tmp_path):
        cfg = write_config(
            tmp_path, "invert",
            {"system": "pendulum", "omega1_star": "0.3", "epsilon": "0.0",
             "eta": "0.1", "Omega0": "0.305", "N": "2048"},
        )
        out = tmp_path / "art"
        rc = cli.main(["invert", "--config", cfg, "--out", str(out)])
        assert rc == 0
        payload = json.loads((out / "invert.json").read_text())
        assert abs(payload["Omega_star"] - 0.3) < 1e-9


class TestNormalizeFamily:
    def test_normalize_zero_eps(self, tmp_path):
        cfg = write_config(
            tmp_path, "normalize",
            {"epsilon": "0.0", "eta": "0.1", "Omega": "0.41", "omega1": "0.41",
             "trunc_fourier": "12", "r_max": "3"},
        )
        out = tmp_path / "art"
        rc = cli.main(["normalize", "--config", cfg, "--out", str(out)])
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["steps_completed"] == 3
        rows = (out / "norms.csv").read_text().splitlines()
        assert rows[0] == "r,norm_X,norm_xi,norm_chi2,norm_Omega"
        for row in rows[1:]:
            assert all(float(v) == 0.0 for v in row.split(",")[1:4])
        assert (out / "final_series.txt").exists()
        assert (out / "generators.txt").exists()
        assert (out / "timings.json").exists()

    def test_verify_command(self, tmp_path):
        cfg = write_config(
            tmp_path, "verify",
            {"epsilon": "0.01", "eta": "0.1", "Omega": "0.38258858593160827",
             "omega1": repr(2 - (1 + math.sqrt(5)) / 2), "trunc_fourier": "16",
             "r_max": "4", "r_list": "2 4", "n_points": "128"},
        )
        out = tmp_path / "art"
        rc = cli.main(["verify", "--config", cfg, "--out", str(out)])
        assert rc == 0
        rows = (out / "verify.csv").read_text().splitlines()
        assert rows[0] == "r,max_abs_P1"
        vals = [float(r.split(",")[1]) for r in rows[1:]]
        assert vals[0] > vals[1]

    def test_basin_command(self, tmp_path):
        cfg = write_config(
            tmp_path, "basin",
            {"epsilon": "0.01", "eta": "0.1", "Omega": "0.38258858593160827",
             "omega1": repr(2 - (1 + math.sqrt(5)) / 2), "trunc_fourier": "16",
             "r_max": "4", "n_curve_samples": "16", "n_checks": "2"},
        )
        out = tmp_path / "art"
        rc = cli.main(["basin", "--config", cfg, "--out", str(out), "--seed", "3"])
        assert rc == 0
        payload = json.loads((out / "basin.json").read_text())
        assert payload["B"] > 0
        assert payload["converged_to_torus"] == 2
        rows = (out / "basin_curves.csv").read_text().splitlines()
        assert rows[0] == "branch,p1,q1"
        assert len(rows) == 1 + 2 * 16
