import json

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from isoshell import cellgrid as cg
from isoshell import graphiso as gi
from isoshell import surfiso as si

CELL = cg.UnitCell(N1=16, N2=16)


def _surfaces():
    flat = si.PeriodicSurface(CELL, (1, 0, 0), (0, 1, 0))
    graph = si.PeriodicSurface.from_graph(cg.sample("cos(u)+cos(v)", CELL))
    skew = si.PeriodicSurface(CELL, (1, 0, 0.2), (0.3, 1, 0),
                              cg.sample_vector(["0.1*sin(v)", "0.1*sin(u)", "0.2*cos(u + 0.3*sin(v))"], CELL))
    return {"flat": flat, "graph": graph, "skew": skew}


SURFACES = _surfaces()


@pytest.fixture(scope="module")
def graph_op():
    return si.assemble_darboux(SURFACES["graph"])


def test_degenerate_surfaces_rejected():
    with pytest.raises(si.DegenerateSurfaceError):
        si.PeriodicSurface(CELL, (1, 0, 0), (2, 0, 0))
    # x_u vanishes where sin u = 1
    with pytest.raises(si.DegenerateSurfaceError):
        si.PeriodicSurface(CELL, (1, 0, 0), (0, 1, 0), cg.sample_vector(["cos(u)", "0", "0"], CELL))


def test_constant_rotations_are_trivial():
    for x in SURFACES.values():
        op = si.assemble_darboux(x)
        assert np.abs(op.apply(cg.constant(CELL, [0.3, -1.0, 2.0])).data).max() == 0.0


def test_flat_operator_formula():
    x = SURFACES["flat"]
    w = cg.random_bandlimited(CELL, np.random.default_rng(2), kind="vector")
    got = si.assemble_darboux(x).apply(w).data
    wu, wv = cg.diff(w, "u").data, cg.diff(w, "v").data
    ref = np.cross(wv, [1, 0, 0]) - np.cross(wu, [0, 1, 0])
    assert np.abs(got - ref).max() <= 1e-12


def test_matrix_matches_apply(graph_op):
    A = graph_op.matrix
    assert np.abs(A - A.T).max() <= 1e-12
    w = cg.random_bandlimited(CELL, np.random.default_rng(0), kind="vector")
    lhs = graph_op.basis.coefficients(graph_op.apply(w)).ravel()
    assert np.abs(lhs - A @ graph_op.coefficients(w)).max() <= 1e-12


def test_rotation_field_of_graph_mode(graph_op):
    z = SURFACES["graph"].xtilde.component(2)
    zd = cg.sample("cos(u)-cos(v)", CELL)
    w = si.rotation_field_from_deflection(z, zd)
    assert graph_op.apply(w).norm() <= 1e-8
    # same field through the pointwise 6x3 solve of xdot_mu = w ^ x_mu
    U, V = CELL.coords()
    xdu = cg.PeriodicField(CELL, np.stack([-np.sin(U) ** 2, 0 * U, -np.sin(U)], -1))
    xdv = cg.PeriodicField(CELL, np.stack([0 * U, np.sin(V) ** 2, np.sin(V)], -1))
    w2 = si.rotation_field_from_velocity(SURFACES["graph"], xdu, xdv)
    assert np.abs(w2.data - w.data).max() <= 1e-12
    pd = si.support_velocities(SURFACES["graph"], w)
    E = si.strain_from_velocities(SURFACES["graph"].p1, SURFACES["graph"].p2, *pd)
    np.testing.assert_allclose(E.as_array(), [-0.5, 0.5, 0.0], atol=1e-12)


def test_darboux_defect_zero_on_diagonal(graph_op):
    w = cg.random_bandlimited(CELL, np.random.default_rng(5), kind="vector")
    assert si.darboux_defect(graph_op, w, w) == 0.0


def test_flat_defect_absolute():
    rng = np.random.default_rng(6)
    op = si.assemble_darboux(SURFACES["flat"])
    for _ in range(10):
        a = cg.random_bandlimited(CELL, rng, kind="vector")
        b = cg.random_bandlimited(CELL, rng, kind="vector")
        assert si.darboux_defect(op, a, b) <= 1e-12


def test_graph_modes_match_graphiso(graph_op):
    modes = si.periodic_modes_surface(graph_op)
    assert modes.trivial_dim == 3
    live = [m for m in modes if not m.silent]
    assert len(live) == 1
    m = live[0]
    # align with the graph deflection mode: E is linear in w
    z = SURFACES["graph"].xtilde.component(2)
    kern = gi.periodic_kernel(z)
    zd = kern[0].zdot
    wg = si.rotation_field_from_deflection(z, zd)
    np.testing.assert_allclose(m.E.as_array() * wg.norm(), kern[0].E.as_array(), atol=1e-6)


def test_flat_plane_modes():
    modes = si.periodic_modes_surface(SURFACES["flat"])
    assert modes.trivial_dim == 3
    assert not any(not m.silent for m in modes)


@pytest.mark.parametrize("name", ["graph", "skew"])
def test_mode_strain_frame_indifferent(name):
    x = SURFACES[name]
    Q = Rotation.from_rotvec([0.3, -1.1, 0.7]).as_matrix()
    a = si.periodic_modes_surface(x)
    b = si.periodic_modes_surface(x.rotated(Q))
    assert len(a) == len(b)
    for ma, mb in zip(a, b):
        if not ma.silent:
            np.testing.assert_allclose(mb.E.as_array(), ma.E.as_array(), atol=1e-10)


def test_surface_json_round_trip():
    x = SURFACES["skew"]
    y = si.PeriodicSurface.from_dict(json.loads(json.dumps(x.to_dict())))
    assert np.abs(y.xtilde.data - x.xtilde.data).max() <= 1e-15
    assert np.array_equal(y.p1, x.p1)


def _circle_family(t):
    return si.ModeFamily(t, [si.SupportVectors((np.cos(s), 0, 0), (0, np.sin(s), 0)) for s in t])


def test_calibration_of_analytic_family():
    t = np.linspace(0.5, 1.0, 41)
    table = si.family_calibration(_circle_family(t))
    c, s = np.cos(t), np.sin(t)
    ref = np.stack([-c * s, s * c], -1)  # diag(c c', s s')
    got = table.E[:, [0, 1], [0, 1]]
    np.testing.assert_allclose(got[1:-1], ref[1:-1], atol=1e-3)
    rows = table.rows()
    assert all(r["type"] == "hyperbolic" and r["det_sign"] == -1 for r in rows)


def test_calibration_converges_second_order():
    t0 = 0.7
    errs = []
    for h in (0.04, 0.02, 0.01, 0.005):
        t = t0 + h * np.arange(-2, 3)
        table = si.family_calibration(_circle_family(t))
        errs.append(abs(table.E[2, 0, 0] + np.cos(t0) * np.sin(t0)))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert orders.min() >= 1.9


def test_calibration_rejects_non_isometric_family():
    cell = CELL
    samples = [si.PeriodicSurface(cell, (1, 0, 0), (0, 1, 0), cg.sample_vector(["0", "0", f"{a}*cos(u)"], cell))
               for a in (0.1, 0.2, 0.3)]
    with pytest.raises(si.FamilyError):
        si.family_calibration(si.ModeFamily([0, 1, 2], samples))
    with pytest.raises(si.FamilyError):
        si.family_calibration(_circle_family(np.array([0.1, 0.2])))
