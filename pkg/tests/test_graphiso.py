import numpy as np
import pytest

from isoshell import cellgrid as cg
from isoshell import graphiso as gi

CELL = cg.UnitCell()
SMALL = cg.UnitCell(N1=16, N2=16)


@pytest.fixture(scope="module")
def cos_cos():
    z = cg.sample("cos(u)+cos(v)", CELL)
    op = gi.assemble_monge(z)
    return op, gi.periodic_kernel(op)


def test_quadratic_form_algebra():
    q = gi.QuadraticForm(1.0, 2.0, 3.0)
    np.testing.assert_array_equal(q.hessian, [[1, 2], [2, 3]])
    np.testing.assert_array_equal(q.adjugate, [[3, -2], [-2, 1]])
    assert q(2.0, 1.0) == pytest.approx(0.5 * 4 + 2 * 2 + 1.5)
    E = gi.EffectiveStrain.from_matrix([[1, 2], [2, 5]])
    assert (E.E11, E.E22, E.E12) == (1, 5, 2)
    np.testing.assert_array_equal(E.constraint_row(), [5, -4, 1])


def test_zero_profile_is_degenerate():
    op = gi.assemble_monge(cg.zeros(SMALL))
    assert op.degenerate and op.sigma_max == 0
    kern = gi.periodic_kernel(op)
    assert kern.degenerate and len(kern) == 0
    space = gi.effective_isometry_space(op)
    assert space.degenerate and len(space.basis) == 3


def test_monge_annihilates_known_modes(cos_cos):
    op, _ = cos_cos
    zd = cg.sample("cos(u)-cos(v)", CELL)
    assert np.abs(op.apply(zd).data).max() <= 1e-12
    eggbox = gi.assemble_monge(cg.sample("cos(u)*cos(v)", SMALL))
    assert np.abs(eggbox.apply(cg.constant(SMALL, 1.0)).data).max() <= 1e-12


def test_monge_matrix_symmetric_and_consistent(cos_cos):
    op, _ = cos_cos
    M = op.matrix
    assert M.shape == (31 ** 2, 31 ** 2)
    assert np.abs(M - M.T).max() <= 1e-12
    assert np.abs(M[:, 0]).max() <= 1e-12
    f = cg.random_bandlimited(CELL, np.random.default_rng(0))
    lhs = op.basis.coefficients(op.apply(f))
    np.testing.assert_allclose(lhs, M @ op.basis.coefficients(f), atol=1e-12)


def test_self_adjoint_examples(cos_cos):
    op, _ = cos_cos
    f, g = cg.sample("sin(u+v)", CELL), cg.sample("cos(2*u)", CELL)
    assert gi.self_adjoint_defect(op, f, g) <= 1e-10
    assert gi.self_adjoint_defect(op, f, f) == 0.0


def test_bilinear_symmetry():
    z = cg.sample("0.2*cos(u + 0.3*sin(v))", CELL)
    q = gi.QuadraticForm(0.7, -0.4, 1.3)
    a = gi.monge_of_quadratic(z, q)
    b = gi.monge_by_quadratic(q, z)
    assert np.abs(a.data - b.data).max() <= 1e-10


def test_kernel_of_cos_cos(cos_cos):
    op, kern = cos_cos
    lead = [m for m in kern if not m.silent]
    assert len(lead) == 1
    E = lead[0].E
    np.testing.assert_allclose([E.E11, E.E22, E.E12], [-0.5, 0.5, 0.0], atol=1e-12)
    ref = cg.sample("cos(u)-cos(v)", CELL)
    assert np.abs(lead[0].zdot.data - ref.data).max() <= 1e-10
    # silent modes are kernel vectors in the rank-tolerance sense
    for m in kern:
        assert op.residual_norm(m.zdot) <= kern.rank_tol * op.sigma_max * m.zdot.norm()


def test_rank_tol_range():
    with pytest.raises(ValueError):
        gi.periodic_kernel(cg.sample("cos(u)", SMALL), rank_tol=1e-3)


def test_effective_strain_examples():
    z = cg.sample("cos(u)+cos(v)", CELL)
    E = gi.effective_strain_graph(z, cg.sample("cos(u)-cos(v)", CELL))
    np.testing.assert_allclose(E.as_array(), [-0.5, 0.5, 0.0], atol=1e-15)
    assert gi.effective_strain_graph(z, cg.constant(CELL, 2.0)).norm() == 0.0
    z = cg.sample("0.3*cos(u)+0.1*cos(v)", CELL)
    E = gi.effective_strain_graph(z, cg.sample("0.3*cos(u)-0.1*cos(v)", CELL))
    np.testing.assert_allclose(E.as_array(), [-0.045, 0.005, 0.0], atol=1e-12)
    with pytest.warns(UserWarning):
        gi.effective_strain_graph(z, cg.sample("sin(u+v)", CELL), op=gi.assemble_monge(z))


def test_kernel_of_anisotropic_translation_graph():
    z = cg.sample("0.3*cos(u)+0.1*cos(v)", CELL)
    rep, kern, space = gi.graph_report(z)
    E = kern.strains[0]
    np.testing.assert_allclose(E.as_array(), [-0.045, 0.005, 0.0], atol=1e-12)
    q = space.basis[0].as_array()
    assert q[0] / q[2] == pytest.approx(9.0, rel=1e-10)
    assert all(space.verified)


def test_correctors(cos_cos):
    op, kern = cos_cos
    r = gi.corrector_solve(op, gi.QuadraticForm(0, 1, 0), kernel=kern)
    assert r.residual == 0.0 and r.ztilde.norm() == 0.0
    r = gi.corrector_solve(op, gi.QuadraticForm(1, 0, 1), kernel=kern)
    assert r.compatibility <= 1e-10 and r.residual <= 1e-8
    # z~ + q is an exact infinitesimal isometry
    total = op.apply(r.ztilde) + gi.monge_of_quadratic(op.z, gi.QuadraticForm(1, 0, 1))
    assert total.norm() <= 1e-10
    r = gi.corrector_solve(op, gi.QuadraticForm(1, 0, 2), kernel=kern)
    assert abs(r.compatibility - 0.5) <= 1e-6


def test_effective_isometry_space_cos_cos(cos_cos):
    op, kern = cos_cos
    space = gi.effective_isometry_space(op, kernel=kern)
    B = np.array([q.as_array() for q in space.basis])
    np.testing.assert_allclose(B, [[1, 0, 1], [0, 1, 0]], atol=1e-12)
    assert all(space.verified)


@pytest.mark.parametrize("src", ["cos(u)+cos(v)", "0.3*cos(u)+0.1*cos(v)", "cos(u)*cos(v)",
                                 "0.2*cos(u + 0.3*sin(v))", "0.5*cos(u)+0.2*sin(2*u)+0.4*sin(v)"])
def test_theorem_one_property(src):
    z = cg.sample(src, SMALL)
    _, kern, space = gi.graph_report(z)
    for q in space.basis:
        for m in kern:
            assert abs(np.dot(m.E.constraint_row(), q.as_array())) <= 1e-8 * max(m.E.norm(), 1e-300) * q.norm() + 1e-14
    assert all(c <= 1e-8 for c in space.compatibility)


def test_eggbox_strain_is_pure_shear():
    _, kern, space = gi.graph_report(cg.sample("cos(u)*cos(v)", SMALL))
    (E,) = kern.strains
    assert abs(E.E11) <= 1e-12 and abs(E.E22) <= 1e-12 and abs(E.E12) > 0.1
    np.testing.assert_allclose([q.as_array() for q in space.basis], [[1, 0, 0], [0, 0, 1]], atol=1e-12)


def test_strain_scales_quadratically():
    z = cg.sample("0.3*cos(u)+0.1*cos(v)", SMALL)
    E1 = gi.periodic_kernel(z).strains[0].as_array()
    E2 = gi.periodic_kernel(2.0 * z).strains[0].as_array()
    np.testing.assert_allclose(E2, 4.0 * E1, atol=1e-8)


def test_constraint_null_space_two_strains():
    E1 = gi.EffectiveStrain(-0.5, 0.5, 0.0)
    E2 = gi.EffectiveStrain(0.0, 0.0, 1.0)
    rows = gi.constraint_null_space([E1, E2])
    assert rows.shape == (1, 3)
    np.testing.assert_allclose(rows[0], [1, 0, 1])
    assert gi.constraint_null_space([]).shape == (3, 3)


@pytest.mark.parametrize("a,b,ratio", [("cos(u)", "cos(v)", 1.0), ("cos(u)", "2*cos(v)", 0.25),
                                       ("cos(u)", "0.1*cos(v)", 100.0)])
def test_translation_report(a, b, ratio):
    rep = gi.translation_report(a, b, CELL)
    assert rep.e_over_g == pytest.approx(ratio, rel=1e-10)
    assert rep.max_abs_E12 <= 1e-10
    assert rep.E.E12 == 0.0


def test_translation_report_cylinder_and_variables():
    rep = gi.translation_report("cos(u)", "0", SMALL)
    assert rep.B == 0.0 and rep.e_over_g is None and rep.E.det == 0.0
    with pytest.raises(gi.ExpressionVariableError):
        gi.translation_report("cos(v)", "cos(v)", SMALL)
