"""Effective-surface quantities and the homogenized bending equation.

A macroscopic surface ``Y(U, V)`` built from a unit cell with mean strain
``E`` satisfies, componentwise,

    E22 Y_UU + E11 Y_VV - 2 E12 Y_UV = 0 ,

whose type follows the sign of ``det E`` (elliptic when positive).  For a
family of cells the strain depends on a parameter field ``theta`` that is in
turn fixed by matching the metric of ``Y`` to ``I(theta)``; this coupling is
handled by frozen-coefficient (Picard) iteration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import spsolve

from .graphiso import EffectiveStrain, QuadraticForm

CLASSIFY_RTOL = 1e-12
CHARACTERISTIC_RTOL = 1e-10


class ParabolicError(ValueError):
    pass


class CharacteristicEdgeError(ValueError):
    pass


class StencilError(ValueError):
    pass


class TypeChangeError(RuntimeError):
    """The sign of ``det E(theta)`` varies over the domain; ``det_map`` holds it."""

    def __init__(self, message, det_map):
        super().__init__(message)
        self.det_map = det_map


def _as_strain(E):
    if isinstance(E, EffectiveStrain):
        return E
    return EffectiveStrain.from_matrix(E)


# --------------------------------------------------------------------------
# Algebraic outputs
# --------------------------------------------------------------------------

def constraint_residual(q: QuadraticForm, E) -> float:
    """``E11 g + E22 e - 2 E12 f``, i.e. ``adj(H_q) : E``."""
    E = _as_strain(E)
    return E.E11 * q.g + E.E22 * q.e - 2.0 * E.E12 * q.f


def classify(E) -> str:
    """``'elliptic'``, ``'hyperbolic'`` or ``'parabolic'`` from the sign of ``det E``."""
    E = _as_strain(E)
    tol = CLASSIFY_RTOL * E.norm() ** 2
    d = E.det
    if d > tol:
        return "elliptic"
    if d < -tol:
        return "hyperbolic"
    return "parabolic"


def det_sign(E) -> int:
    return {"elliptic": 1, "hyperbolic": -1, "parabolic": 0}[classify(E)]


@dataclass(frozen=True)
class PoissonRatio:
    nu: float | None
    principal_dirs: np.ndarray  # columns: directions of (lambda1, lambda2)
    principal_strains: tuple
    degenerate: bool


def poisson_ratio(E) -> PoissonRatio:
    """``nu = -lambda1 / lambda2`` with ``lambda2`` the larger principal strain in magnitude.

    ``degenerate`` is set when either principal strain vanishes relative to
    ``|E|``; ``nu`` is ``None`` when both do or when ``lambda2`` does.
    """
    E = _as_strain(E)
    lam, R = np.linalg.eigh(E.as_matrix())
    order = np.argsort(np.abs(lam), kind="stable")
    lam, R = lam[order], R[:, order]
    if np.linalg.det(R) < 0:
        R[:, 0] = -R[:, 0]
    l1, l2 = float(lam[0]), float(lam[1])
    tol = CLASSIFY_RTOL * E.norm()
    if abs(l2) <= tol or E.norm() == 0:
        return PoissonRatio(None, R, (l1, l2), True)
    # a vanishing minor strain (det E = 0) gives nu = 0 but is still parabolic
    return PoissonRatio(-l1 / l2, R, (l1, l2), abs(l1) <= tol)


# --------------------------------------------------------------------------
# Calibration tables
# --------------------------------------------------------------------------

class CalibrationTable:
    """Rows ``(t, I(t), E(t))`` with ``I`` positive definite and ``t`` increasing."""

    def __init__(self, t, I, E):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        I = np.asarray(I, dtype=float).reshape(-1, 2, 2)
        E = np.asarray(E, dtype=float).reshape(-1, 2, 2)
        if not (len(t) == len(I) == len(E)) or len(t) == 0:
            raise ValueError("t, I and E must have the same nonzero length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("t must be strictly increasing")
        if np.any(np.linalg.eigvalsh(I)[:, 0] <= 0):
            raise ValueError("every metric I(t) must be positive definite")
        self.t, self.I, self.E = t, I, E
        if len(t) > 1:
            self._Is = CubicSpline(t, I.reshape(-1, 4), axis=0)
            self._Es = CubicSpline(t, E.reshape(-1, 4), axis=0)

    def __len__(self):
        return len(self.t)

    @property
    def interval(self):
        return float(self.t[0]), float(self.t[-1])

    def metric_at(self, theta):
        theta = np.asarray(theta, dtype=float)
        if len(self.t) == 1:
            return np.broadcast_to(self.I[0], theta.shape + (2, 2)).copy()
        return self._Is(theta).reshape(theta.shape + (2, 2))

    def metric_rate_at(self, theta):
        theta = np.asarray(theta, dtype=float)
        if len(self.t) == 1:
            return np.zeros(theta.shape + (2, 2))
        return self._Is(theta, 1).reshape(theta.shape + (2, 2))

    def strain_at(self, theta):
        theta = np.asarray(theta, dtype=float)
        if len(self.t) == 1:
            return np.broadcast_to(self.E[0], theta.shape + (2, 2)).copy()
        return self._Es(theta).reshape(theta.shape + (2, 2))

    def rows(self):
        out = []
        for t, I, E in zip(self.t, self.I, self.E):
            pr = poisson_ratio(E)
            out.append({"t": float(t), "I": I.tolist(), "E": E.tolist(), "nu": pr.nu,
                        "det_sign": det_sign(E), "type": classify(E)})
        return out

    def to_dict(self):
        return {"rows": self.rows()}


# --------------------------------------------------------------------------
# Domains, boundary data and results
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """Rectangle of ``M1 x M2`` intervals of sizes ``H1 x H2`` with corner ``(U0, V0)``.

    For hyperbolic problems with ``E12 != 0`` the rectangle is laid out in the
    principal frame of the equation (see :func:`solve_linear_effective`).
    """

    M1: int
    M2: int
    H1: float
    H2: float
    U0: float = 0.0
    V0: float = 0.0

    def __post_init__(self):
        if self.M1 < 2 or self.M2 < 2 or self.H1 <= 0 or self.H2 <= 0:
            raise ValueError("domain needs at least 2 intervals per side and positive spacing")

    @classmethod
    def box(cls, U0, U1, V0, V1, M1, M2):
        return cls(M1, M2, (U1 - U0) / M1, (V1 - V0) / M2, U0, V0)

    def axes(self):
        return (self.U0 + self.H1 * np.arange(self.M1 + 1), self.V0 + self.H2 * np.arange(self.M2 + 1))

    def nodes(self):
        return np.meshgrid(*self.axes(), indexing="ij")


@dataclass
class BoundaryData:
    """Values ``Y(U, V)`` (shape ``(..., 3)``) and optionally the gradient
    ``dY/d(U, V)`` (shape ``(..., 3, 2)``).

    Elliptic solves read the values on the whole contour; hyperbolic solves
    read values and gradient on the Cauchy edge (``'U0'``, ``'U1'``, ``'V0'``
    or ``'V1'``) and its extension beyond the domain.
    """

    values: callable
    gradient: callable = None
    edge: str = "V0"


def quadratic_data(q: QuadraticForm, edge="V0") -> BoundaryData:
    """Data of the graph ``Y = (U, V, q(U, V))``."""
    def values(U, V):
        U, V = np.broadcast_arrays(np.asarray(U, float), np.asarray(V, float))
        return np.stack([U, V, q(U, V)], -1)

    def gradient(U, V):
        U, V = np.broadcast_arrays(np.asarray(U, float), np.asarray(V, float))
        one, zero = np.ones_like(U), np.zeros_like(U)
        gz = np.stack([q.e * U + q.f * V, q.f * U + q.g * V], -1)
        return np.stack([np.stack([one, zero], -1), np.stack([zero, one], -1), gz], -2)

    return BoundaryData(values, gradient, edge)


def affine_data(P1, P2, edge="V0") -> BoundaryData:
    P1, P2 = np.asarray(P1, float), np.asarray(P2, float)

    def values(U, V):
        U, V = np.broadcast_arrays(np.asarray(U, float), np.asarray(V, float))
        return U[..., None] * P1 + V[..., None] * P2

    def gradient(U, V):
        U = np.asarray(U, float)
        return np.broadcast_to(np.stack([P1, P2], -1), np.shape(np.broadcast_arrays(U, V)[0]) + (3, 2)).copy()

    return BoundaryData(values, gradient, edge)


@dataclass
class EffectiveSurface:
    domain: Domain
    U: np.ndarray
    V: np.ndarray
    Y: np.ndarray  # (M1+1, M2+1, 3)
    frame: np.ndarray = field(default_factory=lambda: np.eye(2))
    theta: np.ndarray | None = None
    misfit: np.ndarray | None = None
    converged: bool = True
    iterations: int = 0
    residual: float = 0.0
    kind: str = ""

    def to_rows(self):
        th = self.theta if self.theta is not None else np.full(self.U.shape, np.nan)
        return np.column_stack([self.U.ravel(), self.V.ravel(), self.Y.reshape(-1, 3), th.ravel()])

    def to_csv(self):
        lines = ["U,V,Yx,Yy,Yz,theta"]
        for r in self.to_rows():
            lines.append(",".join("" if np.isnan(x) else repr(float(x)) for x in r))
        return "\n".join(lines) + "\n"

    def to_dict(self):
        d = {"domain": self.domain.__dict__, "frame": self.frame.tolist(), "kind": self.kind,
             "Y": self.Y.tolist(), "converged": self.converged, "iterations": self.iterations,
             "residual": self.residual}
        if self.theta is not None:
            d["theta"] = self.theta.tolist()
            d["misfit"] = self.misfit.tolist()
        return d


# --------------------------------------------------------------------------
# Stencils
# --------------------------------------------------------------------------

def _coeffs(E):
    """``(a, b, c)`` of ``a Y_UU + 2 b Y_UV + c Y_VV``."""
    if isinstance(E, EffectiveStrain):
        return E.E22, -E.E12, E.E11
    E = np.asarray(E, dtype=float)
    return E[..., 1, 1], -E[..., 0, 1], E[..., 0, 0]


def _apply_stencil(Y, a, b, c, H1, H2):
    """Interior values of ``a Y_UU + 2 b Y_UV + c Y_VV`` (nine-point stencil)."""
    Yuu = (Y[2:, 1:-1] - 2 * Y[1:-1, 1:-1] + Y[:-2, 1:-1]) / H1 ** 2
    Yvv = (Y[1:-1, 2:] - 2 * Y[1:-1, 1:-1] + Y[1:-1, :-2]) / H2 ** 2
    Yuv = (Y[2:, 2:] - Y[2:, :-2] - Y[:-2, 2:] + Y[:-2, :-2]) / (4 * H1 * H2)
    expand = lambda x: np.asarray(x)[..., None] if np.ndim(x) == 2 and Y.ndim == 3 else x
    return expand(a) * Yuu + 2 * expand(b) * Yuv + expand(c) * Yvv


def pde_residual(E, surf: EffectiveSurface) -> np.ndarray:
    """Interior residual of the effective equation on the surface grid (constant ``E``)."""
    R = surf.frame
    a, b, c = _coeffs(E)
    A = R.T @ np.array([[a, b], [b, c]]) @ R
    d = surf.domain
    return _apply_stencil(surf.Y, A[0, 0], A[0, 1], A[1, 1], d.H1, d.H2)


# --------------------------------------------------------------------------
# Elliptic solve
# --------------------------------------------------------------------------

def _elliptic(domain, a, b, c, data):
    """Dirichlet problem for ``a Y_UU + 2 b Y_UV + c Y_VV = 0`` with nodal coefficients."""
    M1, M2, H1, H2 = domain.M1, domain.M2, domain.H1, domain.H2
    U, V = domain.nodes()
    Y = np.zeros(U.shape + (3,))
    bnd = np.ones(U.shape, bool)
    bnd[1:-1, 1:-1] = False
    Y[bnd] = np.asarray(data.values(U[bnd], V[bnd]), dtype=float)
    a, b, c = (np.broadcast_to(x, U.shape)[1:-1, 1:-1].ravel() for x in (a, b, c))
    n1, n2 = M1 - 1, M2 - 1
    idx = np.arange(n1 * n2).reshape(n1, n2)
    I, J = np.meshgrid(np.arange(1, M1), np.arange(1, M2), indexing="ij")
    I, J = I.ravel(), J.ravel()
    stencil = [
        (0, 0, -2 * a / H1 ** 2 - 2 * c / H2 ** 2),
        (1, 0, a / H1 ** 2), (-1, 0, a / H1 ** 2),
        (0, 1, c / H2 ** 2), (0, -1, c / H2 ** 2),
        (1, 1, b / (2 * H1 * H2)), (-1, -1, b / (2 * H1 * H2)),
        (1, -1, -b / (2 * H1 * H2)), (-1, 1, -b / (2 * H1 * H2)),
    ]
    rows, cols, vals = [], [], []
    rhs = np.zeros((n1 * n2, 3))
    for di, dj, w in stencil:
        Ii, Jj = I + di, J + dj
        inner = (Ii >= 1) & (Ii <= M1 - 1) & (Jj >= 1) & (Jj <= M2 - 1)
        k = np.flatnonzero(inner)
        rows.append(idx[I[k] - 1, J[k] - 1])
        cols.append(idx[Ii[k] - 1, Jj[k] - 1])
        vals.append(w[k])
        k = np.flatnonzero(~inner)
        np.subtract.at(rhs, idx[I[k] - 1, J[k] - 1], w[k, None] * Y[Ii[k], Jj[k]])
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n1 * n2, n1 * n2))
    sol = spsolve(A.tocsc(), rhs)
    Y[1:-1, 1:-1] = np.reshape(sol, (n1, n2, 3))
    return U, V, Y


# --------------------------------------------------------------------------
# Hyperbolic marching
# --------------------------------------------------------------------------

def leapfrog(Y0, Y1, r2, steps):
    """March ``Y_tt = c^2 Y_ss`` with ``r2 = (c dt / ds)^2`` (scalar or per step).

    Each step loses one node at each end of the line.  Returns the list of
    lines ``[Y0, Y1, ..., Y_{steps+1}]``.  The scheme is time-symmetric, so
    feeding the last two lines back in reverse order retraces the march.
    """
    lines = [np.asarray(Y0), np.asarray(Y1)]
    r2 = np.asarray(r2, dtype=float)
    for n in range(steps):
        prev, cur = lines[-2], lines[-1]
        w = cur.shape[0]
        off_prev = (prev.shape[0] - w) // 2
        rr = r2 if r2.ndim == 0 else r2[n]
        nxt = (2 * cur[1:-1] - prev[off_prev + 1:off_prev + w - 1]
               + rr * (cur[2:] - 2 * cur[1:-1] + cur[:-2]))
        lines.append(nxt)
    return lines


def _edge_frame(edge):
    """Map marching coordinates ``(s, t)`` (t into the domain) onto domain axes."""
    if edge not in ("U0", "U1", "V0", "V1"):
        raise ValueError(f"unknown Cauchy edge {edge!r}")
    return edge[0] == "U", edge[1] == "1"


def _marching_speed(A, edge, scale):
    """``c^2 = -alpha/gamma`` for diagonal coefficients, ``gamma`` on the marching direction."""
    march_u, _ = _edge_frame(edge)
    alpha, gamma = (A[..., 1, 1], A[..., 0, 0]) if march_u else (A[..., 0, 0], A[..., 1, 1])
    if np.any(np.abs(gamma) <= CHARACTERISTIC_RTOL * scale):
        raise CharacteristicEdgeError(f"Cauchy edge {edge} is characteristic")
    return -alpha / gamma


def _hyperbolic(domain, c2, R, data, cfl_max=1.0):
    """Leapfrog solution of ``Y_tt = c^2 Y_ss`` from Cauchy data on ``data.edge``.

    ``c2`` is a scalar or one value per line ``t = const`` (ordered away from
    the Cauchy edge).  ``R`` maps domain coordinates to global ``(U, V)``.
    """
    march_u, reverse = _edge_frame(data.edge)
    if data.gradient is None:
        raise ValueError("hyperbolic solves need the gradient of the Cauchy data")
    Ms, Mt = (domain.M2, domain.M1) if march_u else (domain.M1, domain.M2)
    Hs, Ht = (domain.H2, domain.H1) if march_u else (domain.H1, domain.H2)
    c2 = np.broadcast_to(np.asarray(c2, dtype=float), (Mt + 1,))
    r2 = c2 * (Ht / Hs) ** 2
    if np.any(r2 > cfl_max ** 2 * (1 + 1e-12)):
        raise StencilError(f"CFL ratio {np.sqrt(r2.max()):.3g} exceeds {cfl_max}")
    # the Cauchy line is extended by Mt nodes per side: each step consumes one
    s = np.arange(-Mt, Ms + Mt + 1) * Hs
    t0 = (Mt * Ht) if reverse else 0.0
    sgn = -1.0 if reverse else 1.0
    s_axis0 = domain.V0 if march_u else domain.U0
    t_axis0 = domain.U0 if march_u else domain.V0
    u_, v_ = (t_axis0 + t0 + 0 * s, s_axis0 + s) if march_u else (s_axis0 + s, t_axis0 + t0 + 0 * s)
    Ug, Vg = R @ np.stack([u_, v_])
    Y0 = np.asarray(data.values(Ug, Vg), dtype=float)
    G = np.asarray(data.gradient(Ug, Vg), dtype=float)  # (n, 3, 2) in global (U, V)
    tdir = R[:, 0] if march_u else R[:, 1]
    Yt = sgn * (G @ tdir)
    lap = (Y0[2:] - 2 * Y0[1:-1] + Y0[:-2]) / Hs ** 2
    Y1 = Y0[1:-1] + Ht * Yt[1:-1] + 0.5 * Ht ** 2 * c2[0] * lap
    lines = leapfrog(Y0[1:-1], Y1, r2[1:Mt], Mt - 1)
    cropped = []
    for line in lines:
        off = (line.shape[0] - (Ms + 1)) // 2
        cropped.append(line[off:off + Ms + 1])
    Yts = np.stack(cropped)  # (Mt+1, Ms+1, 3) indexed by (t, s)
    if reverse:
        Yts = Yts[::-1]
    Y = Yts if march_u else np.transpose(Yts, (1, 0, 2))
    Ug, Vg = to_global_nodes(domain, R)
    return Ug, Vg, Y


def to_global_nodes(domain, R):
    U, V = domain.nodes()
    X = np.einsum("ij,jab->iab", R, np.stack([U, V]))
    return X[0], X[1]


def principal_frame(E):
    """Rotation diagonalizing the coefficient matrix ``[[E22, -E12], [-E12, E11]]``."""
    a, b, c = _coeffs(E)
    A = np.array([[a, b], [b, c]])
    if b == 0:
        return np.eye(2), A
    lam, R = np.linalg.eigh(A)
    if np.linalg.det(R) < 0:
        R[:, 1] = -R[:, 1]
    return R, R.T @ A @ R


def solve_linear_effective(E, domain: Domain, data: BoundaryData) -> EffectiveSurface:
    """Solve ``E22 Y_UU + E11 Y_VV - 2 E12 Y_UV = 0`` with constant ``E``.

    Elliptic: Dirichlet data on the whole contour, nine-point stencil, sparse
    direct solve.  Hyperbolic: Cauchy data on ``data.edge``; when ``E12 != 0``
    the domain rectangle lives in the principal frame (global node
    coordinates are returned in ``U``, ``V``), then leapfrog marching with a
    second-order Taylor start.  Parabolic input is rejected.
    """
    kind = classify(E)
    if kind == "parabolic":
        raise ParabolicError("parabolic (det E = 0) effective equations are not solved")
    a, b, c = _coeffs(E)
    if kind == "elliptic":
        U, V, Y = _elliptic(domain, a, b, c, data)
        surf = EffectiveSurface(domain, U, V, Y, kind=kind)
    else:
        R, A = principal_frame(E)
        c2 = _marching_speed(A, data.edge, np.linalg.norm(A))
        U, V, Y = _hyperbolic(domain, c2, R, data)
        surf = EffectiveSurface(domain, U, V, Y, frame=R, kind=kind)
    res = pde_residual(E, surf)
    scale = max(1.0, float(np.abs(surf.Y).max())) * _as_strain(E).norm() / min(domain.H1, domain.H2) ** 2
    surf.residual = float(np.abs(res).max() / scale) if res.size else 0.0
    return surf


# --------------------------------------------------------------------------
# Picard iteration over a calibration table
# --------------------------------------------------------------------------

def metric_of(Y, domain):
    """Discrete first fundamental form ``(G11, G12, G22)`` of a grid map."""
    Yu = np.gradient(Y, domain.H1, axis=0, edge_order=2)
    Yv = np.gradient(Y, domain.H2, axis=1, edge_order=2)
    return np.sum(Yu * Yu, -1), np.sum(Yu * Yv, -1), np.sum(Yv * Yv, -1)


def _misfit(table, G, theta):
    I = table.metric_at(theta)
    return (G[0] - I[..., 0, 0]) ** 2 + 2 * (G[1] - I[..., 0, 1]) ** 2 + (G[2] - I[..., 1, 1]) ** 2


def _dmisfit(table, G, theta):
    I = table.metric_at(theta)
    dI = table.metric_rate_at(theta)
    return -2 * ((G[0] - I[..., 0, 0]) * dI[..., 0, 0] + 2 * (G[1] - I[..., 0, 1]) * dI[..., 0, 1]
                 + (G[2] - I[..., 1, 1]) * dI[..., 1, 1])


def fit_theta(table: CalibrationTable, G, iters=80):
    """Pointwise ``argmin_t |G - I(t)|^2`` over the table interval by bisection on the derivative."""
    shape = np.shape(G[0])
    t0, t1 = table.interval
    if t0 == t1:
        return np.full(shape, t0)
    lo, hi = np.full(shape, t0), np.full(shape, t1)
    dlo, dhi = _dmisfit(table, G, lo), _dmisfit(table, G, hi)
    bracket = (dlo < 0) & (dhi > 0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        dm = _dmisfit(table, G, mid)
        go_right = dm < 0
        lo = np.where(bracket & go_right, mid, lo)
        hi = np.where(bracket & ~go_right, mid, hi)
    interior = 0.5 * (lo + hi)
    end = np.where(_misfit(table, G, np.full(shape, t0)) <= _misfit(table, G, np.full(shape, t1)), t0, t1)
    return np.where(bracket, interior, end)


def _solve_frozen(table, domain, data, theta):
    Eth = table.strain_at(theta)
    det = Eth[..., 0, 0] * Eth[..., 1, 1] - Eth[..., 0, 1] ** 2
    nrm = np.linalg.norm(Eth.reshape(*theta.shape, 4), axis=-1)
    sign = np.where(det > CLASSIFY_RTOL * nrm ** 2, 1, np.where(det < -CLASSIFY_RTOL * nrm ** 2, -1, 0))
    if np.any(sign == 0) or np.any(sign != sign.flat[0]):
        raise TypeChangeError("effective equation changes type across the domain", det)
    a, b, c = _coeffs(Eth)
    if sign.flat[0] > 0:
        return _elliptic(domain, a, b, c, data)[2]
    if np.any(np.abs(Eth[..., 0, 1]) > CLASSIFY_RTOL * nrm):
        raise NotImplementedError("hyperbolic Picard steps need E12 = 0 throughout the table")
    march_u, _ = _edge_frame(data.edge)
    A = np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)
    c2 = _marching_speed(A, data.edge, nrm)
    # coefficients frozen per marching line (their mean across the line)
    c2_lines = c2.mean(axis=1) if march_u else c2.mean(axis=0)
    if data.edge[1] == "1":
        c2_lines = c2_lines[::-1]
    return _hyperbolic(domain, c2_lines, np.eye(2), data)[2]


def picard_quasilinear(table: CalibrationTable, domain: Domain, data: BoundaryData,
                       theta_init, max_iter=50, fp_tol=1e-10) -> EffectiveSurface:
    """Alternate frozen-coefficient solves of the effective equation with pointwise metric fits.

    Returns the last iterate with ``converged`` set when ``max|dtheta| <= fp_tol``.
    A type change of ``det E(theta)`` over the domain raises
    :class:`TypeChangeError` carrying the determinant map.
    """
    U, V = domain.nodes()
    theta = np.broadcast_to(np.asarray(theta_init, dtype=float), U.shape).copy()
    Y = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Y = _solve_frozen(table, domain, data, theta)
        G = metric_of(Y, domain)
        new = fit_theta(table, G)
        step = float(np.max(np.abs(new - theta)))
        theta = new
        if step <= fp_tol:
            converged = True
            break
    G = metric_of(Y, domain)
    misfit = np.sqrt(_misfit(table, G, theta))
    return EffectiveSurface(domain, U, V, Y, theta=theta, misfit=misfit, converged=converged,
                            iterations=it, kind="picard")
