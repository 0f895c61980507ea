"""Periodic polyhedral (creased) unit cells and their flexes.

Each face rotates rigidly with a constant rotation vector ``w_f``.  A crease
shared by faces ``f`` and ``g`` stays connected exactly when the jump of the
rotation is a hinge about the crease, ``(w_f - w_g) ^ e = 0``.  The vertex
velocities then follow by integrating ``dxdot = w ^ dx`` along edges; lattice
translates of a vertex pick up ``i pdot1 + j pdot2``.

Face corners reference a vertex together with an integer lattice offset
``(i, j)``, meaning the vertex translated by ``i p1 + j p2``.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .graphiso import DEFAULT_RANK_TOL, EffectiveStrain, strain_orientation
from .surfiso import ModeFamily

PLANARITY_TOL = 1e-10
CLOSURE_TOL = 1e-8
ISOMETRY_TOL = 1e-10
MESH_VERSION = 1

MESH_SCHEMA = {
    "type": "object",
    "required": ["version", "p1", "p2", "vertices", "faces"],
    "properties": {
        "version": {"const": MESH_VERSION},
        "p1": {"$ref": "#/$defs/vec3"},
        "p2": {"$ref": "#/$defs/vec3"},
        "vertices": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "required": ["pos", "frac"],
                "properties": {"pos": {"$ref": "#/$defs/vec3"},
                               "frac": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
            },
        },
        "faces": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "array", "minItems": 3,
                "items": {
                    "type": "object", "required": ["v", "off"],
                    "properties": {"v": {"type": "integer", "minimum": 0},
                                   "off": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}},
                },
            },
        },
    },
    "$defs": {"vec3": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}},
}


class MeshError(ValueError):
    pass


class MeshSchemaError(MeshError):
    pass


class PlanarityError(MeshError):
    def __init__(self, face, distance):
        self.face = face
        super().__init__(f"face {face} is not planar (distance {distance:.3g} from its best-fit plane)")


class NonManifoldError(MeshError):
    pass


class ClosureError(MeshError):
    pass


class IsometryError(MeshError):
    pass


@dataclass(frozen=True)
class Edge:
    """Crease ``a -> b + d`` (``d`` the lattice offset of ``b`` relative to ``a``)."""

    a: int
    b: int
    d: tuple
    faces: tuple  # ((face, shift), (face, shift)) ; shift places the face on this edge


class PeriodicMesh:
    """Polyhedral unit cell of a doubly periodic surface."""

    def __init__(self, p1, p2, positions, fracs, faces):
        self.p1 = np.asarray(p1, dtype=float)
        self.p2 = np.asarray(p2, dtype=float)
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        self.fracs = np.asarray(fracs, dtype=float).reshape(-1, 2)
        self.faces = [tuple((int(v), (int(o[0]), int(o[1]))) for v, o in f) for f in faces]
        self._validate()

    # -- construction ---------------------------------------------------------
    @classmethod
    def from_dict(cls, d):
        try:
            jsonschema.validate(d, MESH_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise MeshSchemaError(f"mesh schema error: {exc.message}") from None
        faces = [[(c["v"], c["off"]) for c in f] for f in d["faces"]]
        return cls(d["p1"], d["p2"], [v["pos"] for v in d["vertices"]], [v["frac"] for v in d["vertices"]], faces)

    def to_dict(self):
        return {
            "version": MESH_VERSION,
            "p1": self.p1.tolist(), "p2": self.p2.tolist(),
            "vertices": [{"pos": p.tolist(), "frac": f.tolist()} for p, f in zip(self.positions, self.fracs)],
            "faces": [[{"v": v, "off": list(o)} for v, o in f] for f in self.faces],
        }

    def rotated(self, Q):
        Q = np.asarray(Q, dtype=float)
        return PeriodicMesh(Q @ self.p1, Q @ self.p2, self.positions @ Q.T, self.fracs, self.faces)

    # -- geometry ---------------------------------------------------------------
    def corner(self, v, off):
        return self.positions[v] + off[0] * self.p1 + off[1] * self.p2

    def face_points(self, f):
        return np.array([self.corner(v, o) for v, o in self.faces[f]])

    @property
    def metric(self):
        P = np.stack([self.p1, self.p2])
        return P @ P.T

    def metric_signature(self):
        """Edge vectors' Gram entries within every face; equal for isometric meshes."""
        out = []
        for f in range(len(self.faces)):
            X = self.face_points(f)
            D = np.roll(X, -1, axis=0) - X
            out.append(np.concatenate([np.sum(D * D, 1), np.sum(D * np.roll(D, -1, axis=0), 1)]))
        return np.concatenate(out)

    def _validate(self):
        nv = len(self.positions)
        if len(self.fracs) != nv:
            raise MeshError("each vertex needs lattice coordinates")
        if np.any(self.fracs < 0) or np.any(self.fracs >= 1):
            raise MeshError("lattice coordinates must lie in [0, 1)")
        if np.linalg.matrix_rank(np.stack([self.p1, self.p2]), tol=1e-12) < 2:
            raise MeshError("support vectors are linearly dependent")
        for f, face in enumerate(self.faces):
            if any(v >= nv for v, _ in face):
                raise MeshError(f"face {f} references a missing vertex")
            X = self.face_points(f)
            c = X - X.mean(0)
            n = np.linalg.svd(c)[2][-1]
            dist = float(np.max(np.abs(c @ n)))
            if dist > PLANARITY_TOL * max(1.0, float(np.abs(c).max())):
                raise PlanarityError(f, dist)
        self.edges = self._build_edges()
        chi = nv - len(self.edges) + len(self.faces)
        if chi != 0:
            raise NonManifoldError(f"cell does not tile a torus (Euler characteristic {chi})")
        self._check_connected()

    def _build_edges(self):
        occ = {}
        for f, face in enumerate(self.faces):
            n = len(face)
            for k in range(n):
                (a, oa), (b, ob) = face[k], face[(k + 1) % n]
                d = (ob[0] - oa[0], ob[1] - oa[1])
                fwd, rev = (a, b, d), (b, a, (-d[0], -d[1]))
                if fwd <= rev:
                    key, base, sign = fwd, oa, 1
                else:
                    key, base, sign = rev, ob, -1
                occ.setdefault(key, []).append((f, base, sign))
        edges = []
        for key in sorted(occ):
            uses = occ[key]
            if len(uses) != 2:
                raise NonManifoldError(f"edge {key} is used by {len(uses)} faces (expected 2)")
            if uses[0][2] == uses[1][2]:
                raise NonManifoldError(f"faces {uses[0][0]} and {uses[1][0]} have inconsistent orientation")
            a, b, d = key
            if a == b and d == (0, 0):
                raise MeshError("degenerate edge")
            faces = tuple((f, (-base[0], -base[1])) for f, base, _ in uses)
            edges.append(Edge(a, b, d, faces))
        return edges

    def _check_connected(self):
        adj = {f: set() for f in range(len(self.faces))}
        for e in self.edges:
            (f, _), (g, _) = e.faces
            adj[f].add(g)
            adj[g].add(f)
        seen, todo = {0}, [0]
        while todo:
            for g in adj[todo.pop()] - seen:
                seen.add(g)
                todo.append(g)
        if len(seen) != len(self.faces):
            raise MeshError("face graph is not connected")

    def edge_vector(self, e: Edge):
        return self.corner(e.b, e.d) - self.positions[e.a]

    @property
    def counts(self):
        return {"vertices": len(self.positions), "edges": len(self.edges), "faces": len(self.faces)}


def load_mesh(path) -> PeriodicMesh:
    with open(path) as fp:
        try:
            d = json.load(fp)
        except json.JSONDecodeError as exc:
            raise MeshSchemaError(f"{path}: invalid JSON ({exc})") from None
    return PeriodicMesh.from_dict(d)


def save_mesh(mesh, path):
    Path(path).write_text(json.dumps(mesh.to_dict(), indent=1) + "\n")


# --------------------------------------------------------------------------
# Admissibility and modes
# --------------------------------------------------------------------------

def _unit(v):
    return v / np.linalg.norm(v)


def edge_normals(e_hat):
    """Two orthonormal directions spanning the plane normal to ``e_hat``.

    The first is Gram-Schmidt of the lowest-index coordinate axis not nearly
    parallel to the edge; the second completes a right-handed frame.
    """
    for i in range(3):
        ax = np.eye(3)[i]
        if abs(ax @ e_hat) < 0.9:
            break
    n1 = _unit(ax - (ax @ e_hat) * e_hat)
    return n1, np.cross(e_hat, n1)


def admissibility_residual(mesh: PeriodicMesh, w) -> float:
    """``max_e |(w_f - w_g) ^ e_hat|`` over creases."""
    w = np.asarray(w, dtype=float).reshape(-1, 3)
    worst = 0.0
    for e in mesh.edges:
        (f, _), (g, _) = e.faces
        r = np.linalg.norm(np.cross(w[f] - w[g], _unit(mesh.edge_vector(e))))
        worst = max(worst, float(r))
    return worst


def constraint_matrix(mesh: PeriodicMesh):
    F = len(mesh.faces)
    C = np.zeros((2 * len(mesh.edges), 3 * F))
    for k, e in enumerate(mesh.edges):
        (f, _), (g, _) = e.faces
        if f == g:
            continue  # a face glued to its own translate imposes no hinge
        eh = _unit(mesh.edge_vector(e))
        for r, n in enumerate(edge_normals(eh)):
            row = np.cross(eh, n)  # n . ((wf - wg) ^ e) = (wf - wg) . (e ^ n)
            C[2 * k + r, 3 * f:3 * f + 3] += row
            C[2 * k + r, 3 * g:3 * g + 3] -= row
    return C


def reconstruct_velocity(mesh: PeriodicMesh, w):
    """Vertex velocities and support-vector rates of the flex with face rotations ``w``.

    Velocities are integrated along a breadth-first spanning tree of the
    crease graph; the remaining creases give closure equations that fix
    ``pdot1, pdot2`` (least squares) and whose residual is returned.
    """
    w = np.asarray(w, dtype=float).reshape(-1, 3)
    nv = len(mesh.positions)
    adj = {v: [] for v in range(nv)}
    for k, e in enumerate(mesh.edges):
        adj[e.a].append((k, e.b, e.d, 1))
        adj[e.b].append((k, e.a, (-e.d[0], -e.d[1]), -1))
    # xdot[v] = c[v] + n[v,0] pdot1 + n[v,1] pdot2 along the tree
    c = np.full((nv, 3), np.nan)
    n = np.zeros((nv, 2))
    c[0] = 0.0
    tree = set()
    todo = deque([0])
    while todo:
        a = todo.popleft()
        for k, b, d, s in adj[a]:
            if not np.isnan(c[b, 0]):
                continue
            e = mesh.edges[k]
            dx = s * mesh.edge_vector(e)
            f = e.faces[0][0]
            # xdot(b + d) = xdot(a) + w ^ dx  and  xdot(b + d) = xdot(b) + d.pdot
            c[b] = c[a] + np.cross(w[f], dx)
            n[b] = n[a] - np.asarray(d)
            tree.add(k)
            todo.append(b)
    if np.isnan(c).any():
        raise MeshError("vertex graph is not connected")
    rows, rhs = [], []
    for k, e in enumerate(mesh.edges):
        if k in tree:
            continue
        f = e.faces[0][0]
        coef = n[e.b] + np.asarray(e.d) - n[e.a]
        rows.append(coef)
        rhs.append(np.cross(w[f], mesh.edge_vector(e)) - (c[e.b] - c[e.a]))
    if rows:
        Acoef = np.asarray(rows)
        B = np.asarray(rhs)
        P, *_ = np.linalg.lstsq(Acoef, B, rcond=None)
        closure = float(np.abs(Acoef @ P - B).max())
    else:
        P, closure = np.zeros((2, 3)), 0.0
    xdot = c + n @ P
    return xdot, P[0], P[1], closure


@dataclass(frozen=True)
class MeshMode:
    w: np.ndarray  # (faces, 3)
    pdot1: np.ndarray
    pdot2: np.ndarray
    E: EffectiveStrain
    admissibility: float
    closure: float

    def to_dict(self):
        return {"w": self.w.tolist(), "pdot1": self.pdot1.tolist(), "pdot2": self.pdot2.tolist(),
                "E": self.E.to_dict(), "admissibility": self.admissibility, "closure": self.closure}


class MeshModes(list):
    def __init__(self, modes, kernel_dim, trivial_dim):
        super().__init__(modes)
        self.kernel_dim = kernel_dim
        self.trivial_dim = trivial_dim


def _orient(w, E):
    """Sign convention of :func:`graphiso.strain_orientation`; strain-free
    modes fall back to the first significant rotation component."""
    sgn = strain_orientation(E)
    if sgn:
        return sgn
    flat = w.ravel()
    big = np.flatnonzero(np.abs(flat) > 1e-8 * np.abs(flat).max())
    return -1.0 if flat[big[0]] < 0 else 1.0


def mesh_modes(mesh: PeriodicMesh, rank_tol=DEFAULT_RANK_TOL) -> MeshModes:
    """Nontrivial flexes of the periodic cell (rigid rotations removed).

    Each mode has unit Euclidean norm of the stacked face rotations and is
    orthogonal to the constant rotations.
    """
    F = len(mesh.faces)
    C = constraint_matrix(mesh)
    _, s, Vt = np.linalg.svd(C, full_matrices=True)
    sv = np.zeros(3 * F)
    sv[: s.size] = s
    smax = sv[0] if sv[0] > 0 else 1.0
    V = Vt[sv <= rank_tol * smax].T
    T = np.tile(np.eye(3), (F, 1)) / np.sqrt(F)
    Vnc = V - T @ (T.T @ V)
    U, s2, _ = np.linalg.svd(Vnc, full_matrices=False)
    d = int(np.sum(s2 > 0.5))
    modes = []
    for j in range(d):
        w = U[:, j].reshape(F, 3)
        xdot, pd1, pd2, closure = reconstruct_velocity(mesh, w)
        if closure > CLOSURE_TOL:
            raise ClosureError(f"velocity closure defect {closure:.3g} exceeds {CLOSURE_TOL}")
        E = EffectiveStrain(float(pd1 @ mesh.p1), float(pd2 @ mesh.p2), 0.5 * float(pd1 @ mesh.p2 + pd2 @ mesh.p1))
        sgn = _orient(w, E)
        w, pd1, pd2, E = sgn * w, sgn * pd1, sgn * pd2, E.scaled(sgn)
        modes.append(MeshMode(w, pd1, pd2, E, admissibility_residual(mesh, w), closure))
    return MeshModes(modes, V.shape[1], V.shape[1] - d)


def modes_to_dict(mesh, modes):
    return {"counts": mesh.counts, "kernel_dim": modes.kernel_dim, "trivial_dim": modes.trivial_dim,
            "modes": [m.to_dict() for m in modes]}


# --------------------------------------------------------------------------
# Generators of rigid-foldable families
# --------------------------------------------------------------------------

def translation_mesh(a_steps, b_steps):
    """Discrete translation surface ``X_ij = A_i + B_j`` with two steps per direction.

    ``a_steps``/``b_steps`` are the two edge vectors along each lattice
    direction; the support vectors are their sums.  Every face is a
    parallelogram.
    """
    A = [np.zeros(3), np.asarray(a_steps[0], float)]
    B = [np.zeros(3), np.asarray(b_steps[0], float)]
    p1 = A[1] + np.asarray(a_steps[1], float)
    p2 = B[1] + np.asarray(b_steps[1], float)
    pos = [A[i] + B[j] for i in range(2) for j in range(2)]
    frac = [(0.5 * i, 0.5 * j) for i in range(2) for j in range(2)]

    def ref(i, j):
        return (2 * (i % 2) + (j % 2), (i // 2, j // 2))

    faces = [[ref(i, j), ref(i + 1, j), ref(i + 1, j + 1), ref(i, j + 1)] for i in range(2) for j in range(2)]
    return PeriodicMesh(p1, p2, pos, frac, faces)


@dataclass(frozen=True)
class MiuraGenerator:
    """Miura-ori cell: zig-zag of amplitude angle ``t`` along ``p1`` and a
    sheared zig-zag along ``p2`` keeping the panel angle ``gamma``."""

    a: float = 1.0
    b: float = 1.0
    gamma: float = 1.309

    def steps(self, t):
        l, h = self.a * np.cos(t), self.a * np.sin(t)
        d = self.b * np.cos(self.gamma) / np.cos(t)
        m2 = self.b ** 2 - d ** 2
        if np.real(m2) <= 0:
            raise MeshError(f"Miura fold state t={t} is not realizable")
        m = np.sqrt(m2)
        return [(l, 0, h), (l, 0, -h)], [(d, m, 0), (-d, m, 0)]

    def __call__(self, t):
        return translation_mesh(*self.steps(t))


@dataclass(frozen=True)
class EggboxGenerator:
    """Eggbox cell: zig-zags along both lattice directions with ``h k = c``."""

    a: float = 1.0
    b: float = 1.0
    c: float = 0.25

    def steps(self, t):
        l, h = self.a * np.cos(t), self.a * np.sin(t)
        k = self.c / h
        m2 = self.b ** 2 - k ** 2
        if np.real(m2) <= 0:
            raise MeshError(f"eggbox fold state t={t} is not realizable")
        m = np.sqrt(m2)
        return [(l, 0, h), (l, 0, -h)], [(0, m, k), (0, m, -k)]

    def __call__(self, t):
        return translation_mesh(*self.steps(t))


GENERATORS = {"miura": MiuraGenerator, "eggbox": EggboxGenerator}


def export_family(generator, t, tol=ISOMETRY_TOL) -> ModeFamily:
    """Sample a generator into a :class:`ModeFamily`, checking mutual isometry."""
    t = np.asarray(t, dtype=float)
    meshes = [generator(ti) for ti in t]
    ref = meshes[0].metric_signature()
    for ti, m in zip(t, meshes):
        sig = m.metric_signature()
        if sig.shape != ref.shape or np.max(np.abs(sig - ref)) > tol:
            raise IsometryError(f"generator sample t={ti} is not isometric to t={t[0]}")
    if len(t) > 1 and all(np.allclose(m.metric, meshes[0].metric, rtol=0, atol=tol) for m in meshes):
        raise IsometryError("generator does not flex: the effective metric is constant")
    return ModeFamily(t, meshes, family_tol=tol)
