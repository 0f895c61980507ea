"""Periodic infinitesimal isometries of smooth periodic graphs.

For a profile ``z`` the vertical deflections ``zdot`` that preserve the
metric to first order solve the linearized Monge-Ampere equation

    M_z zdot = z11 zdot22 + z22 zdot11 - 2 z12 zdot12 = 0 .

In Fourier space ``M_z`` maps ``exp(i k.x)`` to
``sum_m zhat(m) (m x k)^2 exp(i (m + k).x)``, which is symmetric for the mean
inner product.  Kernels are computed from the *full-image* matrix, which maps
the band ``|k| <= K`` of the grid onto the wider band ``K + Kz`` that actually
contains ``M_z zdot`` (``Kz`` being the bandwidth of ``z``).  The square
Galerkin matrix truncated to ``|k| <= K`` has a spurious near-kernel living on
the band edge, which the full-image matrix does not.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import cellgrid as cg
from . import exprdsl
from .cellgrid import FourierBasis, PeriodicField

DEFAULT_RANK_TOL = 1e-8
# pseudo-inverse cutoff used for corrector solves
SOLVE_CUTOFF = 1e-12
DEGENERATE_NORM = 1e-12


class ResolutionError(ValueError):
    pass


class ExpressionVariableError(ValueError):
    pass


@dataclass(frozen=True)
class QuadraticForm:
    """``q(u, v) = e u^2/2 + f u v + g v^2/2``."""

    e: float
    f: float
    g: float

    @property
    def hessian(self):
        return np.array([[self.e, self.f], [self.f, self.g]], dtype=float)

    @property
    def adjugate(self):
        return np.array([[self.g, -self.f], [-self.f, self.e]], dtype=float)

    def as_array(self):
        return np.array([self.e, self.f, self.g], dtype=float)

    def norm(self):
        return float(np.linalg.norm(self.as_array()))

    def __call__(self, u, v):
        return 0.5 * self.e * u ** 2 + self.f * u * v + 0.5 * self.g * v ** 2


@dataclass(frozen=True)
class EffectiveStrain:
    E11: float
    E22: float
    E12: float

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[1, 1]), 0.5 * float(m[0, 1] + m[1, 0]))

    def as_matrix(self):
        return np.array([[self.E11, self.E12], [self.E12, self.E22]])

    def as_array(self):
        return np.array([self.E11, self.E22, self.E12])

    def norm(self):
        return float(np.linalg.norm(self.as_matrix()))

    @property
    def det(self):
        return self.E11 * self.E22 - self.E12 ** 2

    def constraint_row(self):
        """Coefficients of ``E11 g + E22 e - 2 E12 f`` acting on ``(e, f, g)``."""
        return np.array([self.E22, -2.0 * self.E12, self.E11])

    def scaled(self, s):
        return EffectiveStrain(s * self.E11, s * self.E22, s * self.E12)

    def to_dict(self):
        return {"E11": self.E11, "E12": self.E12, "E22": self.E22}


# --------------------------------------------------------------------------
# The operator
# --------------------------------------------------------------------------

def _cross_matrix(rows, cols):
    """``(l x k)`` for every pair of integer wavevectors."""
    return (rows[:, None, 0] * cols[None, :, 1] - rows[:, None, 1] * cols[None, :, 0]).astype(float)


class MongeOperator:
    """Linearized Monge-Ampere operator of a periodic profile ``z``."""

    def __init__(self, z: PeriodicField):
        if z.kind != "scalar":
            raise ValueError("profile must be a scalar field")
        self.cell = z.cell
        self.z = cg.bandlimit(z)
        self.z11 = cg.diff(self.z, "u", 2)
        self.z22 = cg.diff(self.z, "v", 2)
        self.z12 = cg.diff(cg.diff(self.z, "u"), "v")
        self.Kz = cg.bandwidth(self.z)
        self.basis = FourierBasis.for_cell(self.cell)
        self.image_basis = FourierBasis(self.basis.K1 + self.Kz[0], self.basis.K2 + self.Kz[1])

    # -- pointwise application ------------------------------------------------
    def apply(self, zdot: PeriodicField) -> PeriodicField:
        """``M_z zdot`` with de-aliased products, truncated to the grid band."""
        cg._check_same_cell(self.z, zdot)
        return (cg.multiply(self.z11, cg.diff(zdot, "v", 2))
                + cg.multiply(self.z22, cg.diff(zdot, "u", 2))
                - 2.0 * cg.multiply(self.z12, cg.diff(cg.diff(zdot, "u"), "v")))

    def residual_norm(self, zdot: PeriodicField) -> float:
        """Exact RMS norm of ``M_z zdot`` (evaluated on a grid fine enough for the full product)."""
        cg._check_same_cell(self.z, zdot)
        M1, M2 = 2 * self.cell.N1, 2 * self.cell.N2
        up = lambda f: cg.interpolate_to_grid(f, M1, M2)
        r = (up(self.z11) * up(cg.diff(zdot, "v", 2)) + up(self.z22) * up(cg.diff(zdot, "u", 2))
             - 2.0 * up(self.z12) * up(cg.diff(cg.diff(zdot, "u"), "v")))
        return float(np.sqrt(np.mean(r ** 2)))

    # -- matrices on the real Fourier basis ------------------------------------
    def _complex_matrix(self, row_basis):
        cell = self.cell
        rows = row_basis.full_modes
        cols = self.basis.full_modes
        m = rows[:, None, :] - cols[None, :, :]
        ok = (np.abs(m[..., 0]) <= self.Kz[0]) & (np.abs(m[..., 1]) <= self.Kz[1])
        zhat = np.fft.fft2(self.z.data) / (cell.N1 * cell.N2)
        vals = np.where(ok, zhat[m[..., 0] % cell.N1, m[..., 1] % cell.N2], 0.0)
        scale = (2 * np.pi) ** 2 / (cell.L1 * cell.L2)
        return vals * (_cross_matrix(rows, cols) * scale) ** 2

    @cached_property
    def matrix(self) -> np.ndarray:
        """Square Galerkin matrix on the real basis of the grid band (symmetric)."""
        return self.basis.realify(self._complex_matrix(self.basis))

    @cached_property
    def full_matrix(self) -> np.ndarray:
        """Map from the grid band onto the band ``K + Kz`` holding the whole image."""
        return self.basis.realify(self._complex_matrix(self.image_basis), self.image_basis)

    @cached_property
    def _svd(self):
        return np.linalg.svd(self.full_matrix, full_matrices=True)

    @property
    def sigma_max(self) -> float:
        s = self._svd[1]
        return float(s[0]) if s.size else 0.0

    @property
    def degenerate(self) -> bool:
        return self.sigma_max < DEGENERATE_NORM

    def kernel_basis(self, rank_tol=DEFAULT_RANK_TOL) -> np.ndarray:
        """Orthonormal kernel basis (columns, real coefficients), constants included."""
        _, s, Vt = self._svd
        n = Vt.shape[0]
        sv = np.zeros(n)
        sv[: s.size] = s
        return Vt[sv <= rank_tol * max(self.sigma_max, np.finfo(float).tiny)].T

    def solve(self, rhs_coeffs, cutoff=SOLVE_CUTOFF):
        """Minimum-norm least-squares solution of ``full_matrix @ x = rhs``."""
        U, s, Vt = self._svd
        keep = s > cutoff * self.sigma_max
        k = int(keep.sum())
        return Vt[:k].T @ ((U[:, :k].T @ rhs_coeffs) / s[:k])


def assemble_monge(z: PeriodicField) -> MongeOperator:
    """Assemble ``M_z`` for a scalar profile sampled on a unit cell."""
    if min(z.cell.N1, z.cell.N2) < 8:
        raise ResolutionError("resolution must be at least 8")
    return MongeOperator(z)


def monge_of_quadratic(z: PeriodicField, q: QuadraticForm) -> PeriodicField:
    """``M_z q = z11 g + z22 e - 2 z12 f``."""
    op = z if isinstance(z, MongeOperator) else MongeOperator(z)
    return op.z11 * q.g + op.z22 * q.e - 2.0 * q.f * op.z12


def monge_by_quadratic(q: QuadraticForm, z: PeriodicField) -> PeriodicField:
    """``M_q z = e z22 + g z11 - 2 f z12`` (constant coefficients)."""
    z11 = cg.diff(z, "u", 2)
    z22 = cg.diff(z, "v", 2)
    z12 = cg.diff(cg.diff(z, "u"), "v")
    return q.e * z22 + q.g * z11 - 2.0 * q.f * z12


def self_adjoint_defect(z, f: PeriodicField, g: PeriodicField) -> float:
    """``|<g, M_z f> - <f, M_z g>|`` for scalar fields on one cell."""
    op = z if isinstance(z, MongeOperator) else MongeOperator(z)
    cg._check_same_cell(f, g)
    cg._check_same_cell(op.z, f)
    return abs(cg.inner(g, op.apply(f)) - cg.inner(f, op.apply(g)))


# --------------------------------------------------------------------------
# Effective strain and kernel
# --------------------------------------------------------------------------

def effective_strain_graph(z: PeriodicField, zdot: PeriodicField, op=None) -> EffectiveStrain:
    """Mean strain ``-(grad zdot grad z^T + grad z grad zdot^T)/2`` of a deflection."""
    cg._check_same_cell(z, zdot)
    if op is not None:
        res = op.residual_norm(zdot)
        if res > 1e-6:
            warnings.warn(f"deflection is not an infinitesimal isometry (|M_z zdot| = {res:.2e})",
                          stacklevel=2)
    zu, zv = cg.gradient(z)
    du, dv = cg.gradient(zdot)
    E11 = -cg.inner(zu, du)
    E22 = -cg.inner(zv, dv)
    E12 = -0.5 * (cg.inner(zu, dv) + cg.inner(zv, du))
    return EffectiveStrain(E11, E22, E12)


@dataclass(frozen=True)
class GraphMode:
    zdot: PeriodicField
    E: EffectiveStrain
    silent: bool
    coeffs: np.ndarray  # real Fourier coefficients of zdot


class KernelModes(list):
    """List of :class:`GraphMode` with kernel diagnostics attached.

    Attributes
    ----------
    degenerate : bool
        The operator vanishes (flat profile): every periodic field is a mode.
    basis : ndarray
        Orthonormal kernel basis including the constant (coefficient columns).
    amplitude : float
        RMS amplitude given to each mode.
    """

    def __init__(self, modes, degenerate, basis, amplitude, rank_tol):
        super().__init__(modes)
        self.degenerate = degenerate
        self.basis = basis
        self.amplitude = amplitude
        self.rank_tol = rank_tol

    @property
    def strains(self):
        return [m.E for m in self if not m.silent]


def _fix_sign(vec, rtol=1e-8):
    big = np.flatnonzero(np.abs(vec) > rtol * np.abs(vec).max())
    return -vec if big.size and vec[big[0]] < 0 else vec


def strain_orientation(E: EffectiveStrain, rtol=1e-8, atol=1e-12) -> float:
    """Frame-indifferent sign for a mode with strain ``E`` (0 when ``E`` vanishes).

    The dominant principal strain is made positive; when both principal
    strains have equal magnitude the first significant entry of
    ``(E22, E12, E11)`` is made positive instead.
    """
    n = E.norm()
    if n <= atol:
        return 0.0
    lam = np.linalg.eigvalsh(E.as_matrix())
    if abs(abs(lam[0]) - abs(lam[1])) > rtol * n:
        return -1.0 if lam[np.argmax(np.abs(lam))] < 0 else 1.0
    for x in (E.E22, E.E12, E.E11):
        if abs(x) > rtol * n:
            return -1.0 if x < 0 else 1.0
    return 1.0


def strain_map(op: MongeOperator) -> np.ndarray:
    """3 x n matrix taking real coefficients of ``zdot`` to ``(E11, E22, E12)``.

    Integrating by parts, ``E = mean(H_z zdot)`` entrywise.
    """
    b = op.basis
    return np.stack([b.coefficients(op.z11), b.coefficients(op.z22), b.coefficients(op.z12)])


def periodic_kernel(z, rank_tol=DEFAULT_RANK_TOL) -> KernelModes:
    """Periodic infinitesimal isometries of the graph of ``z``, constants removed.

    The kernel basis is rotated so that the leading modes diagonalize the
    strain map (non-silent modes first) and every mode is scaled to the RMS
    amplitude of ``z - mean(z)``; strains then scale like ``z^2``.
    """
    if not 0 < rank_tol <= 1e-4:
        raise ValueError("rank_tol must lie in (0, 1e-4]")
    op = z if isinstance(z, MongeOperator) else assemble_monge(z)
    cell = op.cell
    if op.degenerate:
        return KernelModes([], True, np.empty((op.basis.size, 0)), 0.0, rank_tol)
    V = op.kernel_basis(rank_tol)
    V_nc = V.copy()
    V_nc[0] = 0.0  # remove the constant direction
    U, s, _ = np.linalg.svd(V_nc, full_matrices=False)
    d = int(np.sum(s > 0.5))
    Vm = U[:, :d]
    amp = (op.z - cg.mean(op.z)).norm()
    if d:
        G = strain_map(op) @ Vm
        _, gs, Qt = np.linalg.svd(G, full_matrices=True)
        Vm = Vm @ Qt.T
    modes = []
    for j in range(d):
        c = _fix_sign(Vm[:, j]) * amp
        zdot = op.basis.synthesize(c, cell)
        E = effective_strain_graph(op.z, zdot)
        modes.append(GraphMode(zdot, E, E.norm() <= rank_tol, c))
    full = np.column_stack([np.eye(op.basis.size, 1), Vm]) if d else np.eye(op.basis.size, 1)
    return KernelModes(modes, False, full, amp, rank_tol)


# --------------------------------------------------------------------------
# Correctors and the effective-isometry space
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrectorResult:
    ztilde: PeriodicField
    residual: float
    compatibility: float
    rhs: PeriodicField


def corrector_solve(z, q: QuadraticForm, rank_tol=DEFAULT_RANK_TOL, kernel=None) -> CorrectorResult:
    """Periodic corrector ``zt`` with ``M_z (zt + q) = 0`` in the least-squares sense.

    ``compatibility`` is the norm of the projection of ``r = -M_z q`` on the
    periodic kernel (constants included); the equation is solvable exactly
    when it vanishes.  ``residual`` is ``|M_z zt - r| / |r|``, and both the
    corrector and the residual are 0 when ``r`` vanishes to rounding.
    """
    op = z if isinstance(z, MongeOperator) else assemble_monge(z)
    r = -monge_of_quadratic(op, q)
    if op.degenerate:
        return CorrectorResult(cg.zeros(op.cell), 0.0, 0.0, r)
    kernel = kernel if kernel is not None else periodic_kernel(op, rank_tol)
    rc = op.basis.coefficients(r)
    compat = float(np.linalg.norm(kernel.basis.T @ rc))
    rhs = op.basis.embed(rc, op.image_basis)
    rnorm = np.linalg.norm(rhs)
    # r vanishes identically up to rounding in the second derivatives of z
    hz = op.z11.norm() + op.z22.norm() + 2.0 * op.z12.norm()
    if rnorm <= 1e-13 * hz * q.norm():
        return CorrectorResult(cg.zeros(op.cell), 0.0, compat, r)
    x = op.solve(rhs)
    residual = float(np.linalg.norm(op.full_matrix @ x - rhs) / rnorm)
    return CorrectorResult(op.basis.synthesize(x, op.cell), residual, compat, r)


def _rref_rows(M, tol=1e-12):
    M = np.array(M, dtype=float)
    r = 0
    for c in range(M.shape[1]):
        if r == M.shape[0]:
            break
        p = r + int(np.argmax(np.abs(M[r:, c])))
        if abs(M[p, c]) <= tol:
            continue
        M[[r, p]] = M[[p, r]]
        M[r] /= M[r, c]
        for i in range(M.shape[0]):
            if i != r:
                M[i] -= M[i, c] * M[r]
        r += 1
    M[np.abs(M) < tol] = 0.0
    return M[:r]


def constraint_null_space(strains, rtol=1e-8):
    """Canonical (reduced row echelon) basis of ``{q : adj(H_q).E = 0 for all E}``."""
    if not strains:
        return np.eye(3)
    A = np.array([E.constraint_row() / max(E.norm(), 1e-300) for E in strains])
    _, s, Vt = np.linalg.svd(A)
    rank = int(np.sum(s > rtol * max(s[0], 1e-300)))
    N = Vt[rank:]
    return _rref_rows(N) if N.size else np.empty((0, 3))


@dataclass
class EffectiveIsometrySpace:
    basis: list  # of QuadraticForm
    degenerate: bool
    compatibility: list  # corrector compatibility per basis element
    verified: list
    correctors: list


def effective_isometry_space(z, rank_tol=DEFAULT_RANK_TOL, verify_tol=1e-8, kernel=None) -> EffectiveIsometrySpace:
    """Quadratic forms allowed by the kernel strains, each checked by a corrector solve.

    The constraint is necessary; a basis element that fails the corrector
    check is still listed, with ``verified`` false.
    """
    op = z if isinstance(z, MongeOperator) else assemble_monge(z)
    kernel = kernel if kernel is not None else periodic_kernel(op, rank_tol)
    if kernel.degenerate:
        basis = [QuadraticForm(*row) for row in np.eye(3)]
        return EffectiveIsometrySpace(basis, True, [0.0] * 3, [True] * 3, [None] * 3)
    rows = constraint_null_space(kernel.strains)
    basis, compat, ok, corr = [], [], [], []
    for row in rows:
        q = QuadraticForm(*map(float, row))
        res = corrector_solve(op, q, rank_tol, kernel)
        basis.append(q)
        compat.append(res.compatibility)
        ok.append(res.compatibility <= verify_tol * max(1.0, q.norm()))
        corr.append(res)
    return EffectiveIsometrySpace(basis, False, compat, ok, corr)


# --------------------------------------------------------------------------
# Translation graphs z = a(u) + b(v)
# --------------------------------------------------------------------------

@dataclass
class TranslationReport:
    A: float
    B: float
    E: EffectiveStrain
    e_over_g: float | None
    q_basis: list
    max_abs_E12: float
    kernel_strains: list

    def to_dict(self):
        return {
            "A": self.A, "B": self.B, "E": self.E.to_dict(),
            "e_over_g": self.e_over_g,
            "q_basis": [list(q.as_array()) for q in self.q_basis],
            "max_abs_E12": self.max_abs_E12,
            "kernel_strains": [E.to_dict() for E in self.kernel_strains],
        }


def translation_report(a, b, cell, rank_tol=DEFAULT_RANK_TOL) -> TranslationReport:
    """Effective strain of ``z = a(u) + b(v)`` in closed form plus a kernel cross-check.

    The closed-form mode ``zdot = a - b`` has ``E = diag(-mean a'^2, mean b'^2)``.
    """
    a = exprdsl.parse(a) if isinstance(a, str) else a
    b = exprdsl.parse(b) if isinstance(b, str) else b
    if not exprdsl.free_variables(a) <= {"u"}:
        raise ExpressionVariableError("a must depend on u only")
    if not exprdsl.free_variables(b) <= {"v"}:
        raise ExpressionVariableError("b must depend on v only")
    fa, fb = cg.sample(a, cell), cg.sample(b, cell)
    A = cg.inner(cg.diff(fa, "u"), cg.diff(fa, "u"))
    B = cg.inner(cg.diff(fb, "v"), cg.diff(fb, "v"))
    E = EffectiveStrain(-A, B, 0.0)
    e_over_g = A / B if B > 0 else None
    q_basis = [QuadraticForm(*map(float, r)) for r in constraint_null_space([E] if E.norm() > 0 else [])]
    kern = periodic_kernel(fa + fb, rank_tol)
    max12 = max([abs(m.E.E12) for m in kern], default=0.0)
    return TranslationReport(A, B, E, e_over_g, q_basis, max12, kern.strains)


def graph_report(z, rank_tol=DEFAULT_RANK_TOL):
    """JSON-ready summary: kernel strains, admissible quadratic forms, compatibilities."""
    op = z if isinstance(z, MongeOperator) else assemble_monge(z)
    kern = periodic_kernel(op, rank_tol)
    space = effective_isometry_space(op, rank_tol, kernel=kern)
    return {
        "degenerate": kern.degenerate,
        "kernel_dim": len(kern),
        "E_modes": [{"E": m.E.to_dict(), "silent": m.silent} for m in kern],
        "q_basis": [list(map(float, q.as_array())) for q in space.basis],
        "compat": [float(c) for c in space.compatibility],
        "verified": [bool(v) for v in space.verified],
    }, kern, space
