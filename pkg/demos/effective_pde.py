"""Solving the effective equation for a constant strain.

An elliptic E with a compatible quadratic boundary datum reproduces the
quadratic exactly; a hyperbolic E does the same from Cauchy data.

Run with ``python3 demos/effective_pde.py``.
"""
import numpy as np

from isoshell import effpde
from isoshell import graphiso as gi

cases = {
    "elliptic": (np.diag([0.892, 0.175]), gi.QuadraticForm(0.892, 0.0, -0.175)),
    "hyperbolic": (np.diag([-0.5, 0.5]), gi.QuadraticForm(1.0, 0.0, 1.0)),
}
domain = effpde.Domain.box(-1.0, 1.0, 0.0, 2.0, 40, 40)

for name, (E, q) in cases.items():
    print(name, "constraint residual", effpde.constraint_residual(q, E))
    surf = effpde.solve_linear_effective(E, domain, effpde.quadratic_data(q, "V0"))
    U, V = surf.U, surf.V
    err = np.max(np.abs(surf.Y[..., 2] - q(U, V)))
    print(f"  kind={surf.kind}  max |Yz - q| = {err:.2e}")
