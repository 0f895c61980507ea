"""Effective strain and Poisson ratio along the Miura-ori folding family.

Run with ``python3 demos/miura_calibration.py``.
"""
import numpy as np

from isoshell import effpde, meshiso, surfiso

gen = meshiso.MiuraGenerator()
mesh = gen(0.7)
print(f"cell: {len(mesh.positions)} vertices, {len(mesh.edges)} edges, {len(mesh.faces)} faces")

modes = meshiso.mesh_modes(mesh)
m = modes[0]
print("nontrivial modes:", len(modes))
print("E =", m.E.as_matrix().tolist(), " closure", f"{m.closure:.1e}")

fam = meshiso.export_family(gen, np.linspace(0.2, 1.2, 11))
table = surfiso.family_calibration(fam)
print(f"{'t':>6} {'nu':>9}  type")
for row in table.rows():
    print(f"{row['t']:6.2f} {row['nu']:9.4f}  {row['type']}")

# the Poisson ratio is negative throughout: the pattern is auxetic in-plane
nus = np.array([r["nu"] for r in table.rows()])
print("nu range:", nus.min(), nus.max())
print("elliptic everywhere:", all(effpde.classify(E) == "elliptic" for E in table.E))
