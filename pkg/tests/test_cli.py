import json
import re
import subprocess
import sys

import numpy as np
import pytest
import yaml

from isoshell import cli

FAST = ["check_compatible", "check_incompatible", "graph_aniso", "mesh_miura", "mesh_eggbox",
        "family_miura", "solve_elliptic", "solve_hyperbolic", "surface_cos_cos"]


def _run(name, tmp_path, *flags):
    out = tmp_path / name
    status = cli.main(["run", "--config", str(cli.data_path(f"{name}.yaml")), "--out", str(out), *flags])
    return status, out


def _numbers(obj):
    if isinstance(obj, dict):
        for v in obj.values():
            yield from _numbers(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _numbers(v)
    elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
        yield obj


@pytest.mark.parametrize("name", FAST)
def test_bundled_jobs_run(name, tmp_path):
    status, out = _run(name, tmp_path)
    assert status == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["schema"] == 1 and rep["job"] == yaml.safe_load(cli.data_path(f"{name}.yaml").read_text())["job"]
    txt = (out / "report.txt").read_text()
    # every number quoted in the text report comes from the JSON report
    allowed = {cli._fmt(x) for x in _numbers(rep)} | {str(i) for i in range(100)}
    for tok in re.findall(r"-?\d+(?:\.\d+)?(?:e[-+]\d+)?", txt):
        assert tok in allowed, tok


def test_cos_cos_report(tmp_path):
    status, out = _run("graph_cos_cos", tmp_path)
    assert status == 0
    rep = json.loads((out / "report.json").read_text())["result"]
    lead = rep["leading"]
    assert lead["E"]["E11"] == -0.5 and lead["E"]["E22"] == 0.5 and abs(lead["E"]["E12"]) < 1e-12
    assert lead["nu"] == 1.0 and lead["type"] == "hyperbolic"
    assert rep["kernel"]["q_basis"] == [[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]
    assert rep["translation"]["e_over_g"] == 1.0
    txt = (out / "report.txt").read_text()
    assert "nu = 1  type = hyperbolic" in txt and "(1, 0, 1)" in txt
    # corrector fields written as JSON refs
    assert (out / rep["kernel"]["correctors"][0]).is_file()
    assert (out / "modes.csv").read_text().startswith("mode,E11,E12,E22,silent")


def test_assert_compatible_exit(tmp_path, capsys):
    status, out = _run("check_incompatible", tmp_path, "--assert-compatible")
    assert status == 3
    rep = json.loads((out / "report.json").read_text())["result"]
    assert rep["residual"] == -0.5 and rep["nonzero"]
    assert "diagnostic failure" in capsys.readouterr().err
    assert _run("check_compatible", tmp_path, "--assert-compatible")[0] == 0


@pytest.mark.parametrize("body,module", [
    ("schema: 1\njob: analyze-graph\nprofile: {z: 'cos(u'}\n", "exprdsl"),
    ("schema: 1\njob: analyze-graph\nprofile: {z: 'u'}\n", "cellgrid"),
    ("schema: 2\njob: analyze-graph\n", "cli"),
    ("schema: 1\njob: analyze-graph\nprofile: {a: 'cos(v)', b: 'cos(v)'}\n", "graphiso"),
    ("schema: 1\njob: analyze-mesh\nmesh: {file: missing.json}\n", "cli"),
    ("schema: 1\njob: check-constraint\nq: [1, 0]\nE: [[1, 0], [0, 1]]\n", "cli"),
    ("schema: 1\njob: solve-effective\neffective: {E: [[1, 0], [0, 0]]}\n"
     "domain: {M1: 4, M2: 4, H1: 0.1, H2: 0.1}\nboundary: {quadratic: [0, 0, 0]}\n", "effpde"),
    ("[unclosed", "cli"),
])
def test_validation_errors_exit_2(body, module, tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(body)
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert f"[{module}]" in capsys.readouterr().err


def test_job_kind_mismatch(tmp_path):
    assert cli.main(["analyze-mesh", "--config", str(cli.data_path("graph_aniso.yaml")),
                     "--out", str(tmp_path)]) == 2


def test_mesh_sweep_is_noop(tmp_path):
    status, out = _run("mesh_miura", tmp_path, "--sweep")
    assert status == 0
    assert "no-op" in (out / "report.txt").read_text()


def test_graph_sweep_converges(tmp_path):
    status, out = _run("graph_skew", tmp_path, "--sweep")
    assert status == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["sweep"]["converged"]
    assert (out / "sweep.csv").read_text().startswith("N,change,order")


def test_sweep_cap_without_convergence_exits_3(tmp_path):
    cfg = tmp_path / "sw.yaml"
    cfg.write_text("schema: 1\njob: analyze-graph\noptions: {sweep_cap: 16}\n"
                   "profile: {a: '0.3*exp(2*cos(u))', b: '0.1*cos(v)'}\n")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--sweep"]) == 3


def test_paths_relative_to_config(tmp_path):
    (tmp_path / "cell.json").write_text(cli.data_path("miura.json").read_text())
    cfg = tmp_path / "job.yaml"
    cfg.write_text("schema: 1\njob: analyze-mesh\nmesh: {file: cell.json}\n")
    assert cli.main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / "report.json").is_file()


def test_family_csv_and_mesh_list(tmp_path):
    from isoshell import meshiso
    ts = [0.6, 0.7, 0.8]
    for t in ts:
        meshiso.save_mesh(meshiso.MiuraGenerator()(t), tmp_path / f"m{t}.json")
    cfg = tmp_path / "fam.yaml"
    cfg.write_text(yaml.safe_dump({"schema": 1, "job": "calibrate-family",
                                   "family": {"meshes": [{"t": t, "path": f"m{t}.json"} for t in ts]}}))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "calibration.csv").read_text().splitlines()
    assert rows[0] == "t,I11,I12,I22,E11,E12,E22,nu,det_sign,type" and len(rows) == 4
    assert rows[2].endswith("elliptic")


def test_solve_effective_expression_data(tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text(yaml.safe_dump({
        "schema": 1, "job": "solve-effective",
        "effective": {"E": [[-1, 0], [0, 1]]},
        "domain": {"M1": 10, "M2": 10, "H1": 0.05, "H2": 0.05},
        "boundary": {"values": ["u", "v", "0.5*(u^2 + v^2)"],
                     "gradient": [["1", "0"], ["0", "1"], ["u", "v"]], "edge": "V0"}}))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    data = np.loadtxt(tmp_path / "o" / "surface.csv", delimiter=",", skiprows=1, usecols=range(5))
    U, V, Z = data[:, 0], data[:, 1], data[:, 4]
    assert np.abs(Z - 0.5 * (U ** 2 + V ** 2)).max() <= 1e-12


def test_picard_job(tmp_path):
    cfg = tmp_path / "p.yaml"
    cfg.write_text(yaml.safe_dump({
        "schema": 1, "job": "solve-effective",
        "effective": {"family": {"generator": "miura", "t": {"start": 0.4, "stop": 1.0, "num": 13}},
                      "theta_init": 0.6},
        "domain": {"M1": 8, "M2": 8, "H1": 0.1, "H2": 0.1},
        "boundary": {"values": ["1.5296844*u", "1.8820094*v", "0"]}}))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())["result"]
    assert rep["kind"] == "picard" and rep["converged"]


def test_console_entry_point(tmp_path):
    out = tmp_path / "o"
    r = subprocess.run([sys.executable, "-m", "isoshell", "check-constraint", "--config",
                        str(cli.data_path("check_incompatible.yaml")), "--out", str(out), "--assert-compatible"],
                       capture_output=True, text=True)
    assert r.returncode == 3
    assert "constraint residual = -0.5" in (out / "report.txt").read_text()


def test_reports_are_deterministic(tmp_path):
    a = _run("graph_aniso", tmp_path / "a")[1]
    b = _run("graph_aniso", tmp_path / "b")[1]
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
