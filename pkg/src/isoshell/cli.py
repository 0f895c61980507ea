"""Command line front end: ``isoshell <job> --config job.yaml``.

Exit status is 0 on success, 2 when the configuration or its inputs are
invalid and 3 when a numerical diagnostic fails (incompatible corrector under
``--assert-compatible``, sweep without convergence, closure defects).
"""
from __future__ import annotations

import argparse
import csv
import importlib.resources
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import cellgrid as cg
from . import effpde, exprdsl, graphiso, meshiso, surfiso

JOBS = ("analyze-graph", "analyze-surface", "analyze-mesh", "calibrate-family",
        "solve-effective", "check-constraint")
SWEEP_TOL = 1e-8
SWEEP_START = 8

_num = {"type": ["number", "string"]}
_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_sym2 = {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
         "minItems": 2, "maxItems": 2}
_family = {
    "type": "object",
    "properties": {
        "generator": {"enum": sorted(meshiso.GENERATORS)},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
        "t": {"type": "object", "required": ["start", "stop", "num"],
              "properties": {"start": _num, "stop": _num, "num": {"type": "integer", "minimum": 1}}},
        "meshes": {"type": "array", "items": {"type": "object", "required": ["t", "path"],
                                              "properties": {"t": _num, "path": {"type": "string"}}}},
        "family_tol": {"type": "number", "exclusiveMinimum": 0},
        "richardson": {"type": "boolean"},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema", "job"],
    "properties": {
        "schema": {"const": 1},
        "job": {"enum": list(JOBS)},
        "cell": {"type": "object", "properties": {"L1": _num, "L2": _num,
                                                  "N1": {"type": "integer"}, "N2": {"type": "integer"}},
                 "additionalProperties": False},
        "options": {"type": "object", "properties": {
            "rank_tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-4},
            "sweep_cap": {"type": "integer", "minimum": 8},
            "assert_compatible": {"type": "boolean"},
            "compat_tol": {"type": "number", "exclusiveMinimum": 0},
        }, "additionalProperties": False},
        "profile": {"type": "object", "properties": {"z": {"type": "string"}, "a": {"type": "string"},
                                                     "b": {"type": "string"}},
                    "additionalProperties": False},
        "candidates": {"type": "array", "items": _vec3},
        "surface": {"type": "object", "properties": {
            "graph": {"type": "string"}, "p1": _vec3, "p2": _vec3,
            "xtilde": {"type": "array", "items": {"type": "string"}, "minItems": 3, "maxItems": 3},
            "file": {"type": "string"}}, "additionalProperties": False},
        "mesh": {"type": "object", "properties": {
            "file": {"type": "string"}, "generator": {"enum": sorted(meshiso.GENERATORS)},
            "params": {"type": "object", "additionalProperties": {"type": "number"}}, "t": _num},
            "additionalProperties": False},
        "family": _family,
        "q": _vec3,
        "E": _sym2,
        "effective": {"type": "object", "properties": {
            "E": _sym2, "family": _family,
            "theta_init": _num, "max_iter": {"type": "integer", "minimum": 1},
            "fp_tol": {"type": "number", "exclusiveMinimum": 0}}, "additionalProperties": False},
        "domain": {"type": "object", "required": ["M1", "M2", "H1", "H2"], "properties": {
            "M1": {"type": "integer"}, "M2": {"type": "integer"}, "H1": _num, "H2": _num,
            "U0": _num, "V0": _num}, "additionalProperties": False},
        "boundary": {"type": "object", "properties": {
            "quadratic": _vec3,
            "values": {"type": "array", "items": {"type": "string"}, "minItems": 3, "maxItems": 3},
            "gradient": {"type": "array", "minItems": 3, "maxItems": 3,
                         "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2}},
            "edge": {"enum": ["U0", "U1", "V0", "V1"]}}, "additionalProperties": False},
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"job": {"const": "analyze-graph"}}}, "then": {"required": ["profile"]}},
        {"if": {"properties": {"job": {"const": "analyze-surface"}}}, "then": {"required": ["surface"]}},
        {"if": {"properties": {"job": {"const": "analyze-mesh"}}}, "then": {"required": ["mesh"]}},
        {"if": {"properties": {"job": {"const": "calibrate-family"}}}, "then": {"required": ["family"]}},
        {"if": {"properties": {"job": {"const": "solve-effective"}}},
         "then": {"required": ["effective", "domain", "boundary"]}},
        {"if": {"properties": {"job": {"const": "check-constraint"}}}, "then": {"required": ["q", "E"]}},
    ],
}


class ConfigError(ValueError):
    pass


class DiagnosticFailure(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Bundled fixtures
# --------------------------------------------------------------------------

def data_path(name=None) -> Path:
    """Path of a bundled fixture (or of the fixture directory)."""
    root = Path(str(importlib.resources.files("isoshell") / "data"))
    return root if name is None else root / name


def bundled_configs(job=None):
    """Bundled job configurations, optionally only those of one job kind."""
    out = []
    for p in sorted(data_path().glob("*.yaml")):
        if job is None or yaml.safe_load(p.read_text())["job"] == job:
            out.append(p)
    return out


def translation_graphs():
    """``(name, a, b)`` for every bundled translation-graph profile."""
    out = []
    for p in bundled_configs("analyze-graph"):
        prof = yaml.safe_load(p.read_text())["profile"]
        if "a" in prof:
            out.append((p.stem, prof["a"], prof["b"]))
    return out


# --------------------------------------------------------------------------
# Config handling
# --------------------------------------------------------------------------

def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        cfg = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(cfg, dict) or cfg.get("schema") != 1:
        raise ConfigError(f"{path}: unsupported config schema {cfg.get('schema') if isinstance(cfg, dict) else None!r}"
                          " (expected schema: 1)")
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"{path}: {where}: {exc.message}") from None
    cfg["_base"] = path.parent
    return cfg


def _number(x):
    """Numbers may be written as constant expressions such as ``2*pi``."""
    if isinstance(x, str):
        e = exprdsl.parse(x)
        if exprdsl.free_variables(e):
            raise ConfigError(f"expected a constant, got {x!r}")
        return exprdsl.evaluate(e, 0.0, 0.0)
    return float(x)


def _cell(cfg, N=None):
    c = cfg.get("cell", {})
    N1 = N or c.get("N1", 32)
    N2 = N or c.get("N2", c.get("N1", 32) if N is None else N)
    return cg.UnitCell(_number(c.get("L1", 2 * math.pi)), _number(c.get("L2", 2 * math.pi)), N1, N2)


def _opt(cfg, key, default):
    return cfg.get("options", {}).get(key, default)


def _path(cfg, p):
    return (cfg["_base"] / p).resolve()


# --------------------------------------------------------------------------
# Output helpers
# --------------------------------------------------------------------------

def _round(x):
    if isinstance(x, dict):
        return {str(k): _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    if isinstance(x, np.ndarray):
        return _round(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return None
        r = float(f"{x:.12g}")
        return 0.0 if r == 0 else r
    return x


def _fmt(x):
    return "n/a" if x is None else f"{x:.12g}"


def _fmt_E(E):
    return f"[[{_fmt(E['E11'])}, {_fmt(E['E12'])}], [{_fmt(E['E12'])}, {_fmt(E['E22'])}]]"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fp:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])


def _strain_summary(E):
    E = graphiso.EffectiveStrain(E["E11"], E["E22"], E["E12"]) if isinstance(E, dict) else E
    pr = effpde.poisson_ratio(E)
    return {"E": E.to_dict(), "nu": pr.nu, "nu_degenerate": pr.degenerate,
            "principal_strains": list(pr.principal_strains), "principal_dirs": pr.principal_dirs,
            "type": effpde.classify(E), "det": E.det}


# --------------------------------------------------------------------------
# Jobs
# --------------------------------------------------------------------------

def _profile_field(cfg, cell):
    prof = cfg["profile"]
    if "z" in prof:
        if "a" in prof or "b" in prof:
            raise ConfigError("give either z or the pair a, b")
        return cg.sample(prof["z"], cell), None
    if "a" not in prof or "b" not in prof:
        raise ConfigError("a translation profile needs both a and b")
    a, b = exprdsl.parse(prof["a"]), exprdsl.parse(prof["b"])
    z = cg.sample(a, cell) + cg.sample(b, cell)
    return z, (a, b)


def job_analyze_graph(cfg, out, N=None):
    cell = _cell(cfg, N)
    rank_tol = _opt(cfg, "rank_tol", graphiso.DEFAULT_RANK_TOL)
    z, ab = _profile_field(cfg, cell)
    op = graphiso.assemble_monge(z)
    rep, kern, space = graphiso.graph_report(op, rank_tol)
    report = {"cell": cell.to_dict(), "kernel": rep, "modes": [_strain_summary(m.E) | {"silent": m.silent}
                                                              for m in kern]}
    lead = [m.E for m in kern if not m.silent]
    report["leading"] = _strain_summary(lead[0]) if lead else None
    if ab is not None:
        report["translation"] = graphiso.translation_report(*ab, cell, rank_tol).to_dict()
    cands = [graphiso.QuadraticForm(*q) for q in cfg.get("candidates", [])]
    report["candidates"] = []
    refs = []
    for i, q in enumerate(list(space.basis) + cands):
        res = graphiso.corrector_solve(op, q, rank_tol, kern)
        name = f"corrector_{i}.json"
        refs.append(name)
        if out is not None:
            (out / name).write_text(json.dumps(_round(cg.field_to_dict(res.ztilde))) + "\n")
        if i >= len(space.basis):
            report["candidates"].append({"q": list(q.as_array()), "compat": res.compatibility,
                                         "residual": res.residual})
    report["kernel"]["correctors"] = refs
    tol = _opt(cfg, "compat_tol", 1e-8)
    report["incompatible"] = [c["q"] for c in report["candidates"] if c["compat"] > tol]
    if out is not None:
        _write_csv(out / "modes.csv", ["mode", "E11", "E12", "E22", "silent"],
                   [[i, m.E.E11, m.E.E12, m.E.E22, int(m.silent)] for i, m in enumerate(kern)])
    return report


def _surface(cfg, cell):
    s = cfg["surface"]
    if "file" in s:
        d = json.loads(_path(cfg, s["file"]).read_text())
        if "cell" not in d:
            d["cell"] = cell.to_dict()
        return surfiso.PeriodicSurface.from_dict(d)
    if "graph" in s:
        return surfiso.PeriodicSurface.from_graph(cg.sample(s["graph"], cell))
    if not {"p1", "p2", "xtilde"} <= set(s):
        raise ConfigError("surface needs graph, file, or p1/p2/xtilde")
    return surfiso.PeriodicSurface(cell, s["p1"], s["p2"], cg.sample_vector(s["xtilde"], cell))


def job_analyze_surface(cfg, out, N=None):
    c = cfg.get("cell", {})
    cell = _cell(cfg, N) if (N or "N1" in c) else _cell(cfg, 16)
    rank_tol = _opt(cfg, "rank_tol", graphiso.DEFAULT_RANK_TOL)
    x = _surface(cfg, cell)
    modes = surfiso.periodic_modes_surface(x, rank_tol)
    report = {"cell": cell.to_dict(), "kernel_dim": modes.kernel_dim, "trivial_dim": modes.trivial_dim,
              "modes": [_strain_summary(m.E) | {"silent": m.silent, "pdot1": m.pdot1, "pdot2": m.pdot2}
                        for m in modes]}
    lead = [m.E for m in modes if not m.silent]
    report["leading"] = _strain_summary(lead[0]) if lead else None
    report["q_basis"] = [list(r) for r in graphiso.constraint_null_space(lead)]
    if out is not None:
        _write_csv(out / "modes.csv", ["mode", "E11", "E12", "E22", "silent"],
                   [[i, m.E.E11, m.E.E12, m.E.E22, int(m.silent)] for i, m in enumerate(modes)])
    return report


def _mesh(cfg):
    m = cfg["mesh"]
    if "file" in m:
        return meshiso.load_mesh(_path(cfg, m["file"]))
    if "generator" not in m or "t" not in m:
        raise ConfigError("mesh needs a file or a generator with t")
    return meshiso.GENERATORS[m["generator"]](**m.get("params", {}))(_number(m["t"]))


def job_analyze_mesh(cfg, out, N=None):
    rank_tol = _opt(cfg, "rank_tol", graphiso.DEFAULT_RANK_TOL)
    mesh = _mesh(cfg)
    modes = meshiso.mesh_modes(mesh, rank_tol)
    report = meshiso.modes_to_dict(mesh, modes)
    report["modes"] = [d | _strain_summary(m.E) for d, m in zip(report["modes"], modes)]
    report["nontrivial"] = len(modes)
    report["q_basis"] = [list(r) for r in graphiso.constraint_null_space([m.E for m in modes])]
    if out is not None:
        _write_csv(out / "modes.csv", ["mode", "E11", "E12", "E22", "nu", "type"],
                   [[i, m.E.E11, m.E.E12, m.E.E22, effpde.poisson_ratio(m.E).nu, effpde.classify(m.E)]
                    for i, m in enumerate(modes)])
    return report


def _family(cfg, spec):
    if "generator" in spec:
        if "t" not in spec:
            raise ConfigError("a generator family needs t: {start, stop, num}")
        t = np.linspace(_number(spec["t"]["start"]), _number(spec["t"]["stop"]), spec["t"]["num"])
        gen = meshiso.GENERATORS[spec["generator"]](**spec.get("params", {}))
        fam = meshiso.export_family(gen, t)
    elif "meshes" in spec:
        items = sorted(spec["meshes"], key=lambda m: _number(m["t"]))
        fam = surfiso.ModeFamily([_number(m["t"]) for m in items],
                                 [meshiso.load_mesh(_path(cfg, m["path"])) for m in items])
    else:
        raise ConfigError("family needs a generator or a list of meshes")
    if "family_tol" in spec:
        fam.family_tol = spec["family_tol"]
    return fam


def job_calibrate_family(cfg, out, N=None):
    fam = _family(cfg, cfg["family"])
    table = surfiso.family_calibration(fam, cfg["family"].get("richardson", False))
    if out is not None:
        (out / "calibration.csv").write_text(surfiso.calibration_csv(table))
    rows = table.rows()
    return {"rows": rows, "types": sorted({r["type"] for r in rows}),
            "nu_range": [min(r["nu"] for r in rows if r["nu"] is not None),
                         max(r["nu"] for r in rows if r["nu"] is not None)]}


def _boundary(cfg):
    b = cfg["boundary"]
    edge = b.get("edge", "V0")
    if "quadratic" in b:
        return effpde.quadratic_data(graphiso.QuadraticForm(*b["quadratic"]), edge)
    if "values" not in b:
        raise ConfigError("boundary needs quadratic or values")
    vals = [exprdsl.parse(s) for s in b["values"]]
    grads = [[exprdsl.parse(s) for s in row] for row in b["gradient"]] if "gradient" in b else None

    def values(U, V):
        return np.stack([np.broadcast_to(exprdsl.evaluate(e, U, V), np.shape(U)) for e in vals], -1)

    def gradient(U, V):
        return np.stack([np.stack([np.broadcast_to(exprdsl.evaluate(e, U, V), np.shape(U)) for e in row], -1)
                         for row in grads], -2)

    return effpde.BoundaryData(values, gradient if grads else None, edge)


def job_solve_effective(cfg, out, N=None):
    eff = cfg["effective"]
    d = cfg["domain"]
    domain = effpde.Domain(d["M1"], d["M2"], _number(d["H1"]), _number(d["H2"]),
                           _number(d.get("U0", 0.0)), _number(d.get("V0", 0.0)))
    data = _boundary(cfg)
    report = {}
    if "E" in eff:
        E = graphiso.EffectiveStrain.from_matrix(eff["E"])
        surf = effpde.solve_linear_effective(E, domain, data)
        report["strain"] = _strain_summary(E)
    elif "family" in eff:
        fam = _family(cfg, eff["family"])
        table = surfiso.family_calibration(fam)
        theta0 = _number(eff.get("theta_init", 0.5 * sum(table.interval)))
        try:
            surf = effpde.picard_quasilinear(table, domain, data, theta0, eff.get("max_iter", 50),
                                             eff.get("fp_tol", 1e-10))
        except effpde.TypeChangeError as exc:
            if out is not None:
                np.savetxt(out / "det_map.csv", exc.det_map, delimiter=",")
            raise DiagnosticFailure(f"effpde: {exc}") from None
        report["theta_range"] = [float(surf.theta.min()), float(surf.theta.max())]
        report["misfit_max"] = float(surf.misfit.max())
    else:
        raise ConfigError("effective needs E or family")
    report.update({"kind": surf.kind, "converged": surf.converged, "iterations": surf.iterations,
                   "residual": surf.residual, "domain": domain.__dict__, "frame": surf.frame,
                   "Y_range": [surf.Y.min(axis=(0, 1)), surf.Y.max(axis=(0, 1))]})
    if out is not None:
        (out / "surface.csv").write_text(surf.to_csv())
    return report


def job_check_constraint(cfg, out, N=None):
    q = graphiso.QuadraticForm(*cfg["q"])
    E = graphiso.EffectiveStrain.from_matrix(cfg["E"])
    r = effpde.constraint_residual(q, E)
    tol = _opt(cfg, "compat_tol", 1e-8) * max(E.norm() * q.norm(), 1e-300)
    rep = {"q": list(q.as_array()), "strain": _strain_summary(E), "residual": r, "nonzero": abs(r) > tol}
    rep["incompatible"] = [rep["q"]] if rep["nonzero"] else []
    return rep


JOB_FUNCS = {"analyze-graph": job_analyze_graph, "analyze-surface": job_analyze_surface,
             "analyze-mesh": job_analyze_mesh, "calibrate-family": job_calibrate_family,
             "solve-effective": job_solve_effective, "check-constraint": job_check_constraint}


# --------------------------------------------------------------------------
# Sweep
# --------------------------------------------------------------------------

def _tracked(report):
    """Flat vector of sweep-tracked quantities (leading strain, nu, q-basis)."""
    vals = []
    lead = report.get("leading")
    if lead:
        vals += [lead["E"]["E11"], lead["E"]["E12"], lead["E"]["E22"], lead["nu"] if lead["nu"] is not None else 0.0]
    qb = report.get("kernel", {}).get("q_basis", report.get("q_basis", []))
    vals += [v for row in qb for v in row]
    return np.array(vals, dtype=float)


def resolution_sweep(cfg, out):
    job = cfg["job"]
    if job not in ("analyze-graph", "analyze-surface"):
        return {"notice": f"sweep is a no-op for {job} jobs", "levels": []}, True
    cap = _opt(cfg, "sweep_cap", 32 if job == "analyze-graph" else 16)
    levels, prev, converged = [], None, False
    N = SWEEP_START
    while N <= cap:
        rep = JOB_FUNCS[job](cfg, None, N)
        vals = _tracked(rep)
        change = None if prev is None or prev.shape != vals.shape else float(np.max(np.abs(vals - prev), initial=0.0))
        order = None
        if change and levels and levels[-1]["change"]:
            order = math.log2(levels[-1]["change"] / change)
        levels.append({"N": N, "values": vals, "change": change, "order": order})
        if change is not None and change <= SWEEP_TOL:
            converged = True
            break
        prev = vals
        N *= 2
    if out is not None:
        width = max(len(lv["values"]) for lv in levels)
        _write_csv(out / "sweep.csv", ["N", "change", "order"] + [f"v{i}" for i in range(width)],
                   [[lv["N"], lv["change"], lv["order"]] + [float(v) for v in lv["values"]] for lv in levels])
    return {"levels": levels, "converged": converged, "cap": cap}, converged


# --------------------------------------------------------------------------
# Text report
# --------------------------------------------------------------------------

def _text(rep):
    lines = [f"isoshell {rep['job']} report", ""]
    r = rep["result"]
    lead = r.get("leading") or r.get("strain")
    if "kernel" in r:
        k = r["kernel"]
        lines.append(f"kernel modes: {k['kernel_dim']} (degenerate: {k['degenerate']})")
        for i, m in enumerate(k["E_modes"]):
            lines.append(f"  mode {i}: E = {_fmt_E(m['E'])}  silent: {m['silent']}")
        lines.append("effective isometry basis (e, f, g):")
        for q, c in zip(k["q_basis"], k["compat"]):
            lines.append(f"  ({', '.join(_fmt(v) for v in q)})  compatibility {_fmt(c)}")
    if "modes" in r and "kernel" not in r:
        for i, m in enumerate(r["modes"]):
            lines.append(f"mode {i}: E = {_fmt_E(m['E'])}  nu = {_fmt(m['nu'])}  type = {m['type']}")
    if "q_basis" in r:
        lines.append("effective isometry basis (e, f, g): "
                     + "; ".join("(" + ", ".join(_fmt(v) for v in q) + ")" for q in r["q_basis"]))
    if lead:
        lines.append(f"E = {_fmt_E(lead['E'])}")
        lines.append(f"nu = {_fmt(lead['nu'])}  type = {lead['type']}")
    if "translation" in r:
        t = r["translation"]
        lines.append(f"translation graph: A = {_fmt(t['A'])}, B = {_fmt(t['B'])}, e/g = {_fmt(t['e_over_g'])}")
    for c in r.get("candidates", []):
        lines.append(f"candidate q = ({', '.join(_fmt(v) for v in c['q'])}): compatibility {_fmt(c['compat'])}, "
                     f"residual {_fmt(c['residual'])}")
    if "residual" in r and "q" in r:
        lines.append(f"constraint residual = {_fmt(r['residual'])}  nonzero: {r['nonzero']}")
    if "rows" in r:
        lines.append("t, nu, type:")
        for row in r["rows"]:
            lines.append(f"  {_fmt(row['t'])}  {_fmt(row['nu'])}  {row['type']}")
    if "kind" in r:
        lines.append(f"solve: {r['kind']}  converged: {r['converged']}  iterations: {r['iterations']}  "
                     f"residual: {_fmt(r['residual'])}")
    if "sweep" in rep:
        s = rep["sweep"]
        if "notice" in s:
            lines.append(s["notice"])
        else:
            lines.append(f"sweep converged: {s['converged']} (cap N = {s['cap']})")
            for lv in s["levels"]:
                lines.append(f"  N = {lv['N']}: change {_fmt(lv['change'])}  order {_fmt(lv['order'])}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def run(job, config, out=None, assert_compatible=False, sweep=False):
    """Run one job; returns ``(exit_status, report)``."""
    cfg = load_config(config)
    if job is not None and job != cfg["job"]:
        raise ConfigError(f"config describes a {cfg['job']} job, not {job}")
    out = Path(out) if out is not None else Path(config).parent / "out"
    out.mkdir(parents=True, exist_ok=True)
    result = JOB_FUNCS[cfg["job"]](cfg, out)
    report = {"schema": 1, "job": cfg["job"], "result": result}
    status = 0
    if sweep:
        s, ok = resolution_sweep(cfg, out)
        report["sweep"] = s
        if not ok:
            status = 3
    assert_compatible = assert_compatible or _opt(cfg, "assert_compatible", False)
    if assert_compatible and result.get("incompatible"):
        report["diagnostic"] = "incompatible quadratic forms under assert-compatible"
        status = 3
    report = _round(report)
    (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
    (out / "report.txt").write_text(_text(report))
    return status, report


def _module_of(exc):
    mod = type(exc).__module__.rsplit(".", 1)[-1]
    return mod if mod in ("exprdsl", "cellgrid", "graphiso", "surfiso", "meshiso", "effpde") else "cli"


def main(argv=None):
    parser = argparse.ArgumentParser(prog="isoshell", description="Unit-cell analysis of periodic corrugated shells.")
    parser.add_argument("job", choices=JOBS + ("run",), help="job kind ('run' uses the kind in the config)")
    parser.add_argument("--config", required=True, help="job configuration (YAML, schema: 1)")
    parser.add_argument("--out", help="output directory (default: out/ next to the config)")
    parser.add_argument("--assert-compatible", action="store_true",
                        help="exit 3 if a tested quadratic form is incompatible")
    parser.add_argument("--sweep", action="store_true", help="also run a resolution sweep")
    args = parser.parse_args(argv)
    job = None if args.job == "run" else args.job
    try:
        status, report = run(job, args.config, args.out, args.assert_compatible, args.sweep)
    except (ConfigError, exprdsl.ExpressionError, cg.PeriodicityError, meshiso.MeshError,
            jsonschema.ValidationError, OSError, ValueError) as exc:
        if isinstance(exc, meshiso.ClosureError):
            print(f"isoshell: diagnostic failure [meshiso]: {exc}", file=sys.stderr)
            return 3
        print(f"isoshell: invalid input [{_module_of(exc)}]: {exc}", file=sys.stderr)
        return 2
    except (DiagnosticFailure, effpde.TypeChangeError, RuntimeError) as exc:
        print(f"isoshell: diagnostic failure [{_module_of(exc)}]: {exc}", file=sys.stderr)
        return 3
    if status == 3:
        print(f"isoshell: diagnostic failure: {report.get('diagnostic', 'sweep did not converge')}",
              file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
