import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from pinchlab import __version__
from pinchlab.cli import main
from pinchlab.mesh import load_mesh
from pinchlab.sweep import COLUMNS, line_chart, read_csv

GOLDEN = Path(__file__).parent / "golden"


def run(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def test_version(capsys):
    code, out, _ = run(["version"], capsys)
    assert code == 0 and out.strip() == __version__


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pinchlab", "version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == __version__


def test_generate_sphere(tmp_path, capsys):
    path = tmp_path / "s.off"
    code, out, _ = run(["generate", "--shape", "sphere", "--radius", 1, "--res", 4, "--out", path], capsys)
    assert code == 0
    assert "vertices 2562" in out and "euler characteristic 2" in out
    assert load_mesh(path).n_vertices == 2562


def test_generate_torus(tmp_path, capsys):
    code, out, _ = run(["generate", "--shape", "torus", "--R", 2, "--r", 0.5, "--res", 64, "--out", tmp_path / "t.off"], capsys)
    assert code == 0 and "euler characteristic 0" in out


def test_generate_invalid_torus(tmp_path, capsys):
    code, _, err = run(["generate", "--shape", "torus", "--R", 2, "--r", 3, "--out", tmp_path / "x.off"], capsys)
    assert code == 2 and "error" in err


def test_generate_flag_for_wrong_shape(tmp_path, capsys):
    code, _, err = run(["generate", "--shape", "sphere", "--R", 2, "--out", tmp_path / "x.off"], capsys)
    assert code == 2 and "--R" in err


def test_analyze_sphere_summary(tmp_path, capsys):
    out_path = tmp_path / "r.json"
    code, out, _ = run(["analyze", "--shape", "sphere", "--res", 4, "--out", out_path], capsys)
    assert code == 0
    line = next(l for l in out.splitlines() if l.startswith("lambda1"))
    assert float(line.split()[-1]) == pytest.approx(2.0, rel=0.01)
    theta = next(l for l in out.splitlines() if l.startswith("theta_hat"))
    assert float(theta.split()[-1]) < 0.02
    report = json.loads(out_path.read_text())
    assert report["spectral"]["lambda1"] == pytest.approx(2.0, rel=0.01)


def test_analyze_to_stdout(capsys):
    code, out, err = run(["analyze", "--shape", "sphere", "--res", 2], capsys)
    assert code == 0
    assert json.loads(out)["provenance"]["shape"]["kind"] == "sphere"
    assert "lambda1" in err


def test_analyze_torus_mesh_flags_star_shape(tmp_path, capsys):
    path = tmp_path / "torus.off"
    run(["generate", "--shape", "torus", "--R", 2, "--r", 0.5, "--res", 32, "--out", path], capsys)
    code, out, _ = run(["analyze", "--mesh", path, "--out", tmp_path / "t.json"], capsys)
    assert code == 0
    assert "undefined: not star-shaped" in out


def test_analyze_low_q_warns_and_runs(tmp_path, capsys):
    code, out, err = run(["analyze", "--shape", "sphere", "--res", 2, "--q", 0.9, "--out", tmp_path / "q.json"], capsys)
    assert code == 0
    assert "q <= n/2" in err
    assert json.loads((tmp_path / "q.json").read_text())["provenance"]["config"]["q"] == 0.9


def test_analyze_missing_file(capsys):
    code, _, err = run(["analyze", "--mesh", "does-not-exist.off"], capsys)
    assert code == 1 and "cannot load" in err


def test_analyze_invalid_mesh_file(tmp_path, capsys):
    path = tmp_path / "open.off"
    path.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    code, _, err = run(["analyze", "--mesh", path], capsys)
    assert code == 1 and "boundary" in err


def test_analyze_pipeline_failure_names_stage(tmp_path, capsys):
    path = tmp_path / "tet.off"
    path.write_text("OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n")
    code, _, err = run(["analyze", "--mesh", path], capsys)
    assert code == 3 and "stage curvature" in err


def test_analyze_bad_config(capsys):
    code, _, err = run(["analyze", "--shape", "sphere", "--p", 1.5], capsys)
    assert code == 2 and "p must be" in err


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p": 3.0, "r": 1, "shape": {"kind": "sphere", "params": {"radius": 2.0}, "resolution": 2}}))
    out = tmp_path / "r.json"
    code, _, _ = run(["analyze", "--config", cfg, "--order", 2, "--out", out], capsys)
    assert code == 0
    prov = json.loads(out.read_text())["provenance"]
    assert prov["config"]["p"] == 3.0 and prov["config"]["r"] == 2
    assert prov["shape"]["params"]["radius"] == 2.0


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(["analyze", "--config", cfg, "--shape", "sphere"], capsys)
    assert code == 2 and "bogus" in err


def test_analyze_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(["analyze", "--shape", "perturbed_sphere", "--delta", 0.05, "--res", 3, "--out", path], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_sweep_empty_values(tmp_path, capsys):
    code, _, err = run(["sweep", "--shape", "sphere", "--param", "resolution", "--values", "", "--out", tmp_path / "e.csv"], capsys)
    assert code == 2 and not (tmp_path / "e.csv").exists()


def test_sweep_values_must_increase(tmp_path, capsys):
    code, _, _ = run(["sweep", "--shape", "sphere", "--param", "resolution", "--values", "3,2", "--out", tmp_path / "e.csv"], capsys)
    assert code == 2


def test_sweep_resolution_convergence(tmp_path, capsys):
    out = tmp_path / "res.csv"
    code, _, _ = run(["sweep", "--shape", "sphere", "--radius", 1, "--param", "resolution", "--values", "2,3,4", "--out", out], capsys)
    assert code == 0
    rows = read_csv(out.read_text())
    hm = [abs(r["hm_residual"]) for r in rows]
    assert hm[0] > hm[1] > hm[2]


def test_sweep_failed_row_is_nan(tmp_path, capsys):
    out = tmp_path / "bad.csv"
    code, _, _ = run(["sweep", "--shape", "torus", "--R", 2, "--param", "r", "--values", "0.5,2.5", "--res", 12, "--out", out], capsys)
    assert code == 0
    rows = read_csv(out.read_text())
    assert not math.isnan(rows[0]["lambda1"])
    assert math.isnan(rows[1]["lambda1"]) and rows[1]["notes"].startswith("failed")


def test_sweep_golden(tmp_path, capsys):
    out = tmp_path / "sweep_delta.csv"
    code, _, _ = run(
        ["sweep", "--shape", "perturbed_sphere", "--param", "delta", "--values", "0,0.05,0.1", "--res", 2, "--out", out],
        capsys,
    )
    assert code == 0
    assert out.read_text().splitlines()[0] == ",".join(COLUMNS)
    assert out.read_bytes() == (GOLDEN / "sweep_delta.csv").read_bytes()
    for group in ("spectral", "deficits", "deviations", "cmc"):
        name = f"sweep_delta.{group}.svg"
        assert (tmp_path / name).read_bytes() == (GOLDEN / name).read_bytes()


def test_svg_is_pure_function_of_table():
    rows = read_csv((GOLDEN / "sweep_delta.csv").read_text())
    a = line_chart(rows, ("lambda1", "k_pr"), "spectral", "delta")
    assert a == line_chart(rows, ("lambda1", "k_pr"), "spectral", "delta")
    assert a.startswith("<svg") and a.rstrip().endswith("</svg>")
    assert a == (GOLDEN / "sweep_delta.spectral.svg").read_text()


def test_sweep_unknown_parameter(tmp_path, capsys):
    code, _, err = run(["sweep", "--shape", "sphere", "--param", "delta", "--values", "0,0.1", "--out", tmp_path / "u.csv"], capsys)
    assert code == 2 and "cannot sweep" in err
