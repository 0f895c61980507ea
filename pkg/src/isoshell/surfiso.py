"""Periodic infinitesimal isometries of smooth periodic surfaces.

A surface is ``x(u, v) = u p1 + v p2 + xt(u, v)`` with periodic ``xt``.  An
infinitesimal isometry is encoded by its rotation field ``w`` through
``xdot_mu = w ^ x_mu``; such a ``w`` exists exactly when

    D_x w = w_v ^ x_u - w_u ^ x_v = 0 .

The support vectors then move with ``pdot_mu = mean(w ^ x_mu)`` and the mean
strain is ``E_mn = (<pdot_m, p_n> + <pdot_n, p_m>) / 2``.  As for graphs, the
kernel is taken from the full-image matrix of ``D_x``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import cellgrid as cg
from . import effpde
from .cellgrid import FourierBasis, PeriodicField, UnitCell
from .graphiso import DEFAULT_RANK_TOL, EffectiveStrain, strain_orientation

TANGENT_TOL = 1e-10


class DegenerateSurfaceError(ValueError):
    pass


class FamilyError(ValueError):
    pass


def _skew(a):
    """``[a]x`` with ``[a]x b = a ^ b``; works on stacks of vectors."""
    a = np.asarray(a)
    z = np.zeros(a.shape[:-1])
    return np.stack([
        np.stack([z, -a[..., 2], a[..., 1]], -1),
        np.stack([a[..., 2], z, -a[..., 0]], -1),
        np.stack([-a[..., 1], a[..., 0], z], -1),
    ], -2)


class PeriodicSurface:
    """Immersed surface ``u p1 + v p2 + xt`` over a unit cell."""

    def __init__(self, cell: UnitCell, p1, p2, xtilde: PeriodicField | None = None):
        self.cell = cell
        self.p1 = np.asarray(p1, dtype=float)
        self.p2 = np.asarray(p2, dtype=float)
        if xtilde is None:
            xtilde = cg.zeros(cell, "vector")
        if xtilde.kind != "vector" or xtilde.cell != cell:
            raise ValueError("xtilde must be a vector field on the surface cell")
        self.xtilde = cg.bandlimit(xtilde)
        if np.linalg.eigvalsh(self.metric)[0] <= 0:
            raise DegenerateSurfaceError("support vectors are linearly dependent")
        n = np.linalg.norm(np.cross(self.x_u.data, self.x_v.data), axis=-1)
        if n.min() <= TANGENT_TOL:
            i, j = np.unravel_index(np.argmin(n), n.shape)
            raise DegenerateSurfaceError(f"tangent vectors degenerate at sample ({i}, {j})")

    @classmethod
    def from_graph(cls, z: PeriodicField):
        """The graph ``(u, v, z)``."""
        zero = cg.zeros(z.cell)
        return cls(z.cell, (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), cg.stack([zero, zero, z]))

    @cached_property
    def x_u(self):
        return cg.diff(self.xtilde, "u") + self.p1

    @cached_property
    def x_v(self):
        return cg.diff(self.xtilde, "v") + self.p2

    @property
    def metric(self):
        """Effective metric ``I = <p_m, p_n>``."""
        P = np.stack([self.p1, self.p2])
        return P @ P.T

    def metric_signature(self):
        """First fundamental form at every sample, for isometry checks."""
        xu, xv = self.x_u.data, self.x_v.data
        return np.stack([np.sum(xu * xu, -1), np.sum(xu * xv, -1), np.sum(xv * xv, -1)])

    def rotated(self, Q):
        Q = np.asarray(Q, dtype=float)
        return PeriodicSurface(self.cell, Q @ self.p1, Q @ self.p2,
                               PeriodicField(self.cell, self.xtilde.data @ Q.T))

    def to_dict(self):
        return {"cell": self.cell.to_dict(), "p1": self.p1.tolist(), "p2": self.p2.tolist(),
                "xtilde": cg.field_to_dict(self.xtilde)}

    @classmethod
    def from_dict(cls, d):
        cell = UnitCell.from_dict(d["cell"])
        xt = cg.field_from_dict(d["xtilde"])
        if xt.cell != cell:
            raise ValueError("xtilde cell differs from surface cell")
        return cls(cell, d["p1"], d["p2"], xt)


# --------------------------------------------------------------------------
# Darboux operator
# --------------------------------------------------------------------------

class DarbouxOperator:
    """``w -> w_v ^ x_u - w_u ^ x_v`` on periodic vector fields."""

    def __init__(self, x: PeriodicSurface):
        self.x = x
        self.cell = x.cell
        self.basis = FourierBasis.for_cell(self.cell)
        self.Kx = cg.bandwidth(x.xtilde)
        self.image_basis = FourierBasis(self.basis.K1 + self.Kx[0], self.basis.K2 + self.Kx[1])

    def apply(self, w: PeriodicField) -> PeriodicField:
        """De-aliased ``D_x w`` truncated to the grid band."""
        cg._check_same_cell(w, self.x.xtilde)
        return cg.cross(cg.diff(w, "v"), self.x.x_u) - cg.cross(cg.diff(w, "u"), self.x.x_v)

    def _complex_blocks(self, row_basis):
        cell = self.cell
        rows, cols = row_basis.full_modes, self.basis.full_modes
        s1, s2 = 2 * np.pi / cell.L1, 2 * np.pi / cell.L2
        m = rows[:, None, :] - cols[None, :, :]
        ok = (np.abs(m[..., 0]) <= self.Kx[0]) & (np.abs(m[..., 1]) <= self.Kx[1])
        xhat = np.fft.fft2(self.x.xtilde.data, axes=(0, 1)) / (cell.N1 * cell.N2)
        xm = np.where(ok[..., None], xhat[m[..., 0] % cell.N1, m[..., 1] % cell.N2], 0.0)
        # (k2 m1 - k1 m2) with scaled wavenumbers
        c = (cols[None, :, 1] * m[..., 0] - cols[None, :, 0] * m[..., 1]) * (s1 * s2)
        B = c[..., None, None] * _skew(xm)
        same = np.all(m == 0, axis=-1)
        li, ki = np.nonzero(same)
        k1 = cols[ki, 0] * s1
        k2 = cols[ki, 1] * s2
        B[li, ki] += (-1j * k2[:, None, None] * _skew(self.x.p1) + 1j * k1[:, None, None] * _skew(self.x.p2))
        return B  # (rows, cols, 3, 3)

    def _realify(self, row_basis):
        B = self._complex_blocks(row_basis)
        n, r = self.basis.size, row_basis.size
        A = np.empty((3 * r, 3 * n))
        for a in range(3):
            for b in range(3):
                A[a * r:(a + 1) * r, b * n:(b + 1) * n] = self.basis.realify(B[:, :, a, b], row_basis)
        return A

    @cached_property
    def matrix(self):
        """Square Galerkin matrix (component-major real coefficients); symmetric."""
        return self._realify(self.basis)

    @cached_property
    def full_matrix(self):
        return self._realify(self.image_basis)

    @cached_property
    def _svd(self):
        return np.linalg.svd(self.full_matrix, full_matrices=True)

    def kernel_basis(self, rank_tol=DEFAULT_RANK_TOL):
        _, s, Vt = self._svd
        sv = np.zeros(Vt.shape[0])
        sv[: s.size] = s
        return Vt[sv <= rank_tol * s[0]].T

    def to_field(self, coeffs):
        n = self.basis.size
        return self.basis.synthesize(np.reshape(coeffs, (3, n)), self.cell)

    def coefficients(self, w):
        return self.basis.coefficients(w).ravel()


def assemble_darboux(x: PeriodicSurface) -> DarbouxOperator:
    return DarbouxOperator(x)


def darboux_defect(x, omega: PeriodicField, w: PeriodicField) -> float:
    """``|mean<omega, D_x w> - mean<w, D_x omega>|``."""
    op = x if isinstance(x, DarbouxOperator) else DarbouxOperator(x)
    cg._check_same_cell(omega, w)
    return abs(cg.inner(omega, op.apply(w)) - cg.inner(w, op.apply(omega)))


# --------------------------------------------------------------------------
# Modes
# --------------------------------------------------------------------------

def support_velocities(x: PeriodicSurface, w: PeriodicField):
    """``pdot_mu = mean(w ^ x_mu)``."""
    return cg.mean(cg.cross(w, x.x_u)), cg.mean(cg.cross(w, x.x_v))


def strain_from_velocities(p1, p2, pd1, pd2) -> EffectiveStrain:
    return EffectiveStrain(float(pd1 @ p1), float(pd2 @ p2), 0.5 * float(pd1 @ p2 + pd2 @ p1))


@dataclass(frozen=True)
class SurfaceMode:
    w: PeriodicField
    pdot1: np.ndarray
    pdot2: np.ndarray
    E: EffectiveStrain
    silent: bool


class SurfaceModes(list):
    """Nontrivial modes plus kernel diagnostics (``kernel_dim``, ``trivial_dim``)."""

    def __init__(self, modes, kernel_dim, trivial_dim):
        super().__init__(modes)
        self.kernel_dim = kernel_dim
        self.trivial_dim = trivial_dim


def periodic_modes_surface(x, rank_tol=DEFAULT_RANK_TOL) -> SurfaceModes:
    """Kernel of ``D_x`` with rigid rotations split off.

    Nontrivial modes are ordered by decreasing strain (strain-carrying modes
    first), normalized to unit RMS rotation and signed by
    :func:`graphiso.strain_orientation`, so ``E`` does not depend on the
    ambient frame.
    """
    op = x if isinstance(x, DarbouxOperator) else DarbouxOperator(x)
    surf = op.x
    n = op.basis.size
    V = op.kernel_basis(rank_tol)
    const_idx = [0, n, 2 * n]
    Vnc = V.copy()
    Vnc[const_idx] = 0.0
    U, s, _ = np.linalg.svd(Vnc, full_matrices=False)
    d = int(np.sum(s > 0.5))
    Vm = U[:, :d]
    trivial = V.shape[1] - d
    if d:
        G = np.array([strain_from_velocities(surf.p1, surf.p2, *support_velocities(surf, op.to_field(Vm[:, j]))).as_array()
                      for j in range(d)]).T
        _, _, Qt = np.linalg.svd(G, full_matrices=True)
        Vm = Vm @ Qt.T
    modes = []
    for j in range(d):
        c = Vm[:, j]
        w = op.to_field(c)
        w = w / w.norm()
        pd1, pd2 = support_velocities(surf, w)
        E = strain_from_velocities(surf.p1, surf.p2, pd1, pd2)
        sgn = strain_orientation(E)
        if not sgn:
            big = np.flatnonzero(np.abs(c) > 1e-8 * np.abs(c).max())
            sgn = -1.0 if c[big[0]] < 0 else 1.0
        if sgn < 0:
            w, pd1, pd2, E = -w, -pd1, -pd2, E.scaled(-1.0)
        modes.append(SurfaceMode(w, pd1, pd2, E, E.norm() <= rank_tol))
    return SurfaceModes(modes, V.shape[1], trivial)


# --------------------------------------------------------------------------
# Rotation fields of graph deflections
# --------------------------------------------------------------------------

def _integrate_gradient(g1: PeriodicField, g2: PeriodicField) -> PeriodicField:
    """Zero-mean periodic potential whose gradient best fits ``(g1, g2)``."""
    cell = g1.cell
    k1 = np.fft.fftfreq(cell.N1, 1.0 / cell.N1) * (2 * np.pi / cell.L1)
    k2 = np.fft.fftfreq(cell.N2, 1.0 / cell.N2) * (2 * np.pi / cell.L2)
    k1[cell.N1 // 2] = 0
    k2[cell.N2 // 2] = 0
    K1, K2 = np.meshgrid(k1, k2, indexing="ij")
    den = K1 ** 2 + K2 ** 2
    den[den == 0] = 1.0
    F = -1j * (K1 * np.fft.fft2(g1.data) + K2 * np.fft.fft2(g2.data)) / den
    F[0, 0] = 0
    return PeriodicField(cell, np.real(np.fft.ifft2(F)))


def rotation_field_from_deflection(z: PeriodicField, zdot: PeriodicField) -> PeriodicField:
    """Rotation field of the isometry of the graph of ``z`` with vertical part ``zdot``.

    ``w1 = zdot_v``, ``w2 = -zdot_u`` and ``w3`` integrates
    ``(z_u zdot_uv - z_v zdot_uu, z_u zdot_vv - z_v zdot_uv)``, which is a
    gradient exactly when ``M_z zdot = 0``.
    """
    zu, zv = cg.gradient(z)
    du, dv = cg.gradient(zdot)
    duu, dvv = cg.diff(zdot, "u", 2), cg.diff(zdot, "v", 2)
    duv = cg.diff(du, "v")
    g1 = cg.multiply(zu, duv) - cg.multiply(zv, duu)
    g2 = cg.multiply(zu, dvv) - cg.multiply(zv, duv)
    return cg.stack([dv, -du, _integrate_gradient(g1, g2)])


def rotation_field_from_velocity(x: PeriodicSurface, xdot_u: PeriodicField, xdot_v: PeriodicField) -> PeriodicField:
    """Pointwise least-squares solve of ``xdot_mu = w ^ x_mu`` for ``w``."""
    A = np.concatenate([-_skew(x.x_u.data), -_skew(x.x_v.data)], axis=-2)  # (N1, N2, 6, 3)
    b = np.concatenate([xdot_u.data, xdot_v.data], axis=-1)
    AtA = np.einsum("...ki,...kj->...ij", A, A)
    Atb = np.einsum("...ki,...k->...i", A, b)
    return PeriodicField(x.cell, np.linalg.solve(AtA, Atb[..., None])[..., 0])


# --------------------------------------------------------------------------
# Mode families and calibration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SupportVectors:
    """Bare support vectors; a family sample with no shape to check for isometry."""

    p1: np.ndarray
    p2: np.ndarray

    @property
    def metric(self):
        P = np.stack([np.asarray(self.p1, float), np.asarray(self.p2, float)])
        return P @ P.T


class ModeFamily:
    """Samples ``t_0 < ... < t_m`` of a one-parameter isometric family.

    Each sample needs ``p1``, ``p2``; samples that also provide
    ``metric_signature()`` (surfaces, meshes) are checked for mutual isometry.
    """

    def __init__(self, t, samples, family_tol=1e-6):
        t = np.asarray(t, dtype=float)
        if len(t) != len(samples):
            raise FamilyError("one sample per parameter value is required")
        if np.any(np.diff(t) <= 0):
            raise FamilyError("parameter samples must be strictly increasing")
        self.t = t
        self.samples = list(samples)
        self.family_tol = family_tol

    def isometry_defect(self):
        worst = 0.0
        for a, b in zip(self.samples, self.samples[1:]):
            if hasattr(a, "metric_signature") and hasattr(b, "metric_signature"):
                sa, sb = a.metric_signature(), b.metric_signature()
                if np.shape(sa) != np.shape(sb):
                    raise FamilyError("family samples have different discretizations")
                worst = max(worst, float(np.max(np.abs(sa - sb))))
        return worst

    def metrics(self):
        return np.array([_metric(s) for s in self.samples])


def _metric(sample):
    P = np.stack([np.asarray(sample.p1, float), np.asarray(sample.p2, float)])
    return P @ P.T


def _derivative(t, I, richardson=False):
    D = np.gradient(I, t, axis=0, edge_order=2)
    if richardson and len(t) >= 5:
        h = np.diff(t)
        if np.allclose(h, h[0], rtol=1e-12):
            D2 = (I[4:] - I[:-4]) / (4 * h[0])
            D[2:-2] = (4 * D[2:-2] - D2) / 3
    return D


def family_calibration(fam: ModeFamily, richardson=False) -> "effpde.CalibrationTable":
    """Metric ``I(t)``, strain ``E(t) = dI/dt / 2``, Poisson ratio and type per sample.

    Derivatives are second-order finite differences (central inside, one-sided
    at the ends); ``richardson`` upgrades interior points to fourth order on
    uniform samples.
    """
    if len(fam.t) < 3:
        raise FamilyError("calibration needs at least 3 samples")
    defect = fam.isometry_defect()
    if defect > fam.family_tol:
        raise FamilyError(f"family samples are not isometric (metric mismatch {defect:.3g})")
    I = fam.metrics()
    E = 0.5 * _derivative(fam.t, I, richardson)
    return effpde.CalibrationTable(fam.t, I, E)


def calibration_csv(table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "I11", "I12", "I22", "E11", "E12", "E22", "nu", "det_sign", "type"])
    for row in table.rows():
        w.writerow([repr(float(row["t"])), *(repr(float(v)) for v in (
            row["I"][0][0], row["I"][0][1], row["I"][1][1],
            row["E"][0][0], row["E"][0][1], row["E"][1][1])),
            "" if row["nu"] is None else repr(float(row["nu"])), row["det_sign"], row["type"]])
    return buf.getvalue()
