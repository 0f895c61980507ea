"""Effective isometries of the translation graph z = cos u + 0.1 cos v.

Run with ``python3 demos/translation_graph.py``.
"""
import numpy as np

from isoshell import cellgrid as cg
from isoshell import graphiso as gi

cell = cg.UnitCell(2 * np.pi, 2 * np.pi, 32, 32)
z = cg.sample("cos(u) + 0.1*cos(v)", cell)

# closed form: E = diag(-<a'^2>, <b'^2>), so e/g = <a'^2>/<b'^2>
rep = gi.translation_report("cos(u)", "0.1*cos(v)", cell)
print("closed-form E      :", rep.E.as_matrix().tolist())
print("e/g                :", rep.e_over_g)
print("max |E12| in kernel:", rep.max_abs_E12)

# the same information from the numerical kernel of the Monge operator
kern = gi.periodic_kernel(z)
for i, m in enumerate(kern):
    print(f"mode {i}: E = {m.E.as_matrix().tolist()}  silent={m.silent}")

space = gi.effective_isometry_space(z, kernel=kern)
for q, c in zip(space.basis, space.compatibility):
    print("admissible q =", q.as_array(), " compatibility", f"{c:.2e}")

# a form that violates the constraint: the corrector leaves a residual
bad = gi.QuadraticForm(1.0, 0.0, 2.0)
res = gi.corrector_solve(z, bad, kernel=kern)
print("q = (1, 0, 2) compatibility:", f"{res.compatibility:.3e}")
