import csv
import hashlib
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from lamshoot import io
from lamshoot.cli import run
from lamshoot.errors import ConfigurationError
from lamshoot.geometry import cylinder_curve, revolve_mesh
from lamshoot.ode_core import Params, integrate


def _cli(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = run([*argv, "--out", str(out)])
    return code, out


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


class TestIO:
    def test_trajectory_round_trip(self, tmp_path):
        traj = integrate(0.5, Params(2, 0))
        io.write_trajectory_csv(traj, tmp_path / "t.csv")
        data = io.read_trajectory_csv(tmp_path / "t.csv")
        assert list(data) == ["s", "x", "r", "theta", "theta_dot"]
        for name in data:
            assert np.array_equal(data[name], getattr(traj, name))

    def test_obj_round_trip(self, tmp_path):
        mesh = revolve_mesh(cylinder_curve(Params(2, 0), samples=5), segments=6)
        io.write_obj(mesh, tmp_path / "m.obj")
        back = io.read_obj(tmp_path / "m.obj")
        assert np.array_equal(back.faces, mesh.faces)
        assert np.allclose(back.vertices, mesh.vertices, rtol=1e-8, atol=1e-9)
        text = (tmp_path / "m.obj").read_text().splitlines()
        face = next(line for line in text if line.startswith("f "))
        assert min(int(t.split("//")[0]) for t in face.split()[1:]) >= 1

    def test_config_parsing(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("# comment\nn = 3\n\nrel-tol=1e-9  # trailing\n")
        assert io.read_config(path) == {"n": "3", "rel_tol": "1e-9"}
        path.write_text("oops\n")
        with pytest.raises(ConfigurationError):
            io.read_config(path)

    def test_json_numbers(self):
        assert io.json_number(math.inf) is None and io.json_number(1.5) == 1.5
        assert io.fmt(0.1) == "0.10000000000000001" and io.fmt(None) == ""


class TestShoot:
    def test_type1_ends_on_theta_pi(self, tmp_path):
        code, out = _cli(tmp_path, "shoot", "--n", "2", "--lambda", "0", "--delta", "0.5")
        assert code == 0
        events = json.loads((out / "events.json").read_text())
        assert events[-1]["kind"] == "theta-pi"
        summary = json.loads((out / "summary.json").read_text())
        assert summary["label"].startswith("type1")

    def test_cylinder_theta_zero(self, tmp_path):
        code, out = _cli(tmp_path, "shoot", "--n", "2", "--lambda", "0", "--delta", "1")
        assert code == 0
        data = io.read_trajectory_csv(out / "trajectory.csv")
        assert np.abs(data["theta"]).max() < 1e-10

    def test_negative_delta(self, tmp_path, capsys):
        code, out = _cli(tmp_path, "shoot", "--n", "2", "--lambda", "0", "--delta", "-1")
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["exit_code"] == 2 and err["error"] == "usage"

    def test_unknown_flag(self, tmp_path, capsys):
        code, _ = _cli(tmp_path, "shoot", "--delta", "0.5", "--bogus")
        assert code == 2
        assert json.loads(capsys.readouterr().err)["error"] == "usage"

    def test_step_failure(self, tmp_path, capsys):
        code, out = _cli(tmp_path, "shoot", "--delta", "0.5", "--max-steps", "3")
        assert code == 5
        assert json.loads(capsys.readouterr().err)["error"] == "step-failure"
        assert (out / "manifest.json").exists()

    def test_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n = 3\nlambda = -0.1\ndelta = 0.4\nrel_tol = 1e-9\n")
        code, out = _cli(tmp_path, "shoot", "--config", str(cfg), "--lambda", "-0.2")
        assert code == 0
        conf = _manifest(out)["config"]
        assert conf["n"] == 3 and conf["lambda"] == -0.2 and conf["delta"] == 0.4
        assert conf["controls"]["rel_tol"] == 1e-9
        assert conf["controls"]["abs_tol"] == 1e-12

    def test_bad_config_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("colour = blue\n")
        code, _ = _cli(tmp_path, "shoot", "--delta", "0.5", "--config", str(cfg))
        assert code == 2

    def test_manifest_checksums(self, tmp_path):
        code, out = _cli(tmp_path, "shoot", "--delta", "0.5")
        man = _manifest(out)
        assert man["command"] == "shoot"
        names = {f["name"] for f in man["files"]}
        assert names == {"trajectory.csv", "events.json", "summary.json"}
        for f in man["files"]:
            assert hashlib.sha256((out / f["name"]).read_bytes()).hexdigest() == f["sha256"]


class TestSearchCommands:
    def test_find_cylinder_flipped(self, tmp_path):
        code, out = _cli(tmp_path, "find-cylinder", "--n", "2", "--lambda", "-0.4",
                         "--report-flipped")
        assert code == 0
        rep = json.loads((out / "search.json").read_text())
        assert rep["reported_lambda"] == 0.4 and rep["normal_flipped"]
        assert rep["type3_signature"] is True
        assert rep["bracket"][1] - rep["bracket"][0] < 1e-10
        with open(out / "curve.csv") as fh:
            header = next(csv.reader(fh))
        assert header[-4:] == ["kappa_rot", "kappa_prof", "H", "residual"]

    def test_find_cylinder_no_bracket(self, tmp_path, capsys):
        code, _ = _cli(tmp_path, "find-cylinder", "--lambda", "-10")
        assert code == 3
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "no-bracket" and len(err["rows"]) == 64

    def test_find_torus(self, tmp_path):
        code, out = _cli(tmp_path, "find-torus", "--n", "2", "--lambda", "-0.24", "--tol", "1e-12")
        assert code == 0
        for tag in ("lower", "upper"):
            mesh = io.read_obj(out / f"torus_{tag}.obj")
            assert mesh.is_watertight() and mesh.euler_characteristic() == 0
        comp = json.loads((out / "comparison.json").read_text())
        assert comp[0]["delta"] < comp[1]["delta"]

    def test_find_torus_precision_limit(self, tmp_path, capsys):
        code, _ = _cli(tmp_path, "find-torus", "--n", "3", "--lambda", "-0.1")
        assert code == 4
        assert json.loads(capsys.readouterr().err)["error"] == "precision-limit"

    def test_sweep_all_type1(self, tmp_path):
        code, out = _cli(tmp_path, "sweep", "--n", "2", "--lambda", "0", "--grid", "50")
        assert code == 0
        with open(out / "sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 50
        assert all(r["label"].startswith("type1") for r in rows)

    def test_scan_far_negative(self, tmp_path):
        code, out = _cli(tmp_path, "scan", "--n", "2", "--lambdas=-50")
        assert code == 0
        rep = json.loads((out / "scan.json").read_text())
        assert rep["rows"][0]["cylinder_found"] is False
        assert rep["c1_estimate"] is None


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lamshoot", "shoot", "--delta", "0.5",
                           "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "m" / "manifest.json").exists()
