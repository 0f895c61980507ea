"""Periodic rectangular unit cells, sampled fields and spectral calculus.

A :class:`PeriodicField` holds samples of a scalar or 3-vector field at the
nodes ``(i*L1/N1, j*L2/N2)`` of a :class:`UnitCell`.  Derivatives are
trigonometric-spectral (FFT of real data); the Nyquist mode is dropped by
first-order derivatives.  Products of fields are de-aliased with the 3/2 rule
and truncated back to the band ``|k| <= N/2 - 1``.

:class:`FourierBasis` is the real orthonormal basis (for the mean-value inner
product) of band-limited trigonometric polynomials; linear operators on
periodic fields are assembled as dense matrices on it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import exprdsl

PERIODICITY_TOL = 1e-10


class PeriodicityError(ValueError):
    pass


class CellMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class UnitCell:
    """Rectangle ``[0, L1) x [0, L2)`` sampled on an ``N1 x N2`` grid."""

    L1: float = 2 * np.pi
    L2: float = 2 * np.pi
    N1: int = 32
    N2: int = 32

    def __post_init__(self):
        if not (self.L1 > 0 and self.L2 > 0):
            raise ValueError("cell periods must be positive")
        for n in (self.N1, self.N2):
            if int(n) != n or n < 8 or n % 2:
                raise ValueError(f"resolution must be an even integer >= 8, got {n}")

    @property
    def shape(self):
        return (self.N1, self.N2)

    @property
    def band(self):
        """Highest retained wavenumber index in each direction."""
        return (self.N1 // 2 - 1, self.N2 // 2 - 1)

    def coords(self):
        u = np.arange(self.N1) * (self.L1 / self.N1)
        v = np.arange(self.N2) * (self.L2 / self.N2)
        return np.meshgrid(u, v, indexing="ij")

    def with_resolution(self, N1, N2=None):
        return UnitCell(self.L1, self.L2, N1, N1 if N2 is None else N2)

    def to_dict(self):
        return {"L1": float(self.L1), "L2": float(self.L2), "N1": int(self.N1), "N2": int(self.N2)}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["L1"]), float(d["L2"]), int(d["N1"]), int(d["N2"]))


class PeriodicField:
    """Immutable samples of a scalar (N1, N2) or vector (N1, N2, 3) field."""

    __slots__ = ("cell", "data")

    def __init__(self, cell: UnitCell, data):
        data = np.array(data, dtype=float)
        if data.shape[:2] != cell.shape or data.ndim not in (2, 3) or (data.ndim == 3 and data.shape[2] != 3):
            raise ValueError(f"samples of shape {data.shape} do not match cell {cell.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "cell", cell)
        object.__setattr__(self, "data", data)

    def __setattr__(self, name, value):
        raise AttributeError("PeriodicField is immutable")

    @property
    def kind(self):
        return "scalar" if self.data.ndim == 2 else "vector"

    def __repr__(self):
        return f"PeriodicField({self.kind}, cell={self.cell})"

    def _other(self, other):
        if isinstance(other, PeriodicField):
            _check_same_cell(self, other)
            return other.data
        return other

    def __add__(self, other):
        return PeriodicField(self.cell, self.data + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return PeriodicField(self.cell, self.data - self._other(other))

    def __rsub__(self, other):
        return PeriodicField(self.cell, self._other(other) - self.data)

    def __mul__(self, scalar):
        if isinstance(scalar, PeriodicField):
            return multiply(self, scalar)
        return PeriodicField(self.cell, self.data * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return PeriodicField(self.cell, self.data / scalar)

    def __neg__(self):
        return PeriodicField(self.cell, -self.data)

    def component(self, i):
        return PeriodicField(self.cell, self.data[..., i])

    def norm(self):
        """Root-mean-square norm, i.e. ``sqrt(inner(f, f))``."""
        return float(np.sqrt(inner(self, self)))


def _check_same_cell(a, b):
    if a.cell != b.cell:
        raise CellMismatchError(f"fields live on different cells: {a.cell} vs {b.cell}")


def zeros(cell, kind="scalar"):
    shape = cell.shape if kind == "scalar" else cell.shape + (3,)
    return PeriodicField(cell, np.zeros(shape))


def constant(cell, value):
    value = np.asarray(value, dtype=float)
    return PeriodicField(cell, np.broadcast_to(value, cell.shape + value.shape))


def stack(components):
    """Assemble a vector field from three scalar fields."""
    cell = components[0].cell
    for c in components[1:]:
        _check_same_cell(components[0], c)
    return PeriodicField(cell, np.stack([c.data for c in components], axis=-1))


# --------------------------------------------------------------------------
# Sampling
# --------------------------------------------------------------------------

def _as_expr(expr):
    return exprdsl.parse(expr) if isinstance(expr, str) else expr


def check_periodic(expr, cell, tol=PERIODICITY_TOL):
    """Compare samples on the far edges of the cell with their wrapped images."""
    expr = _as_expr(expr)
    U, V = cell.coords()
    u = U[:, 0]
    v = V[0, :]
    f = exprdsl.evaluate(expr, U, V)
    scale = max(1.0, float(np.max(np.abs(f))))
    du = np.max(np.abs(exprdsl.evaluate(expr, np.full_like(v, cell.L1), v) - exprdsl.evaluate(expr, 0.0 * v, v)))
    dv = np.max(np.abs(exprdsl.evaluate(expr, u, np.full_like(u, cell.L2)) - exprdsl.evaluate(expr, u, 0.0 * u)))
    mismatch = max(du, dv)
    if mismatch > tol * scale:
        raise PeriodicityError(
            f"expression {exprdsl.to_source(expr)} is not periodic on the cell "
            f"(boundary mismatch {mismatch:.3g})"
        )
    return mismatch


def sample(expr, cell: UnitCell, check=True) -> PeriodicField:
    """Sample a scalar expression (source text or tree) on the cell grid."""
    expr = _as_expr(expr)
    if check:
        check_periodic(expr, cell)
    U, V = cell.coords()
    return PeriodicField(cell, np.broadcast_to(exprdsl.evaluate(expr, U, V), cell.shape))


def sample_vector(exprs, cell: UnitCell, check=True) -> PeriodicField:
    if len(exprs) != 3:
        raise ValueError("a vector field needs three component expressions")
    return stack([sample(e, cell, check) for e in exprs])


# --------------------------------------------------------------------------
# Spectral calculus
# --------------------------------------------------------------------------

def _wavenumbers(N, L, order):
    k = np.fft.fftfreq(N, 1.0 / N) * (2 * np.pi / L)
    if order % 2:
        k[N // 2] = 0.0
    return k


def _spectrum(field):
    return np.fft.fft2(field.data, axes=(0, 1))


def _from_spectrum(cell, F):
    return PeriodicField(cell, np.real(np.fft.ifft2(F, axes=(0, 1))))


def diff(field: PeriodicField, direction="u", order=1) -> PeriodicField:
    """Spectral partial derivative of order 1 or 2 along ``u`` or ``v``."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    cell = field.cell
    if direction == "u":
        k = _wavenumbers(cell.N1, cell.L1, order)[:, None]
    elif direction == "v":
        k = _wavenumbers(cell.N2, cell.L2, order)[None, :]
    else:
        raise ValueError(f"direction must be 'u' or 'v', got {direction!r}")
    mult = (1j * k) ** order
    if field.kind == "vector":
        mult = mult[..., None]
    return _from_spectrum(cell, _spectrum(field) * mult)


def gradient(field):
    return diff(field, "u"), diff(field, "v")


def mean(field: PeriodicField):
    """Mean value over the cell (exact quadrature for band-limited data)."""
    m = field.data.mean(axis=(0, 1))
    return float(m) if field.kind == "scalar" else m


def inner(a: PeriodicField, b: PeriodicField) -> float:
    _check_same_cell(a, b)
    if a.kind != b.kind:
        raise ValueError("inner product of a scalar and a vector field")
    prod = a.data * b.data
    if a.kind == "vector":
        prod = prod.sum(axis=-1)
    return float(prod.mean())


def bandlimit(field: PeriodicField) -> PeriodicField:
    """Drop the Nyquist rows/columns of the spectrum."""
    cell = field.cell
    F = _spectrum(field)
    F[cell.N1 // 2] = 0
    F[:, cell.N2 // 2] = 0
    return _from_spectrum(cell, F)


def interpolate_to_grid(field, M1, M2):
    """Values of the band-limited interpolant of ``field`` on a finer M1 x M2 grid."""
    cell = field.cell
    N1, N2 = cell.shape
    K1, K2 = cell.band
    F = _spectrum(field)
    G = np.zeros((M1, M2) + F.shape[2:], dtype=complex)
    r1 = np.r_[0:K1 + 1, -K1:0]
    r2 = np.r_[0:K2 + 1, -K2:0]
    G[np.ix_(r1 % M1, r2 % M2)] = F[np.ix_(r1 % N1, r2 % N2)]
    return np.real(np.fft.ifft2(G, axes=(0, 1))) * (M1 * M2 / (N1 * N2))


def _truncate_from_padded(cell, values):
    M1, M2 = values.shape[:2]
    N1, N2 = cell.shape
    K1, K2 = cell.band
    G = np.fft.fft2(values, axes=(0, 1))
    F = np.zeros((N1, N2) + values.shape[2:], dtype=complex)
    r1 = np.r_[0:K1 + 1, -K1:0]
    r2 = np.r_[0:K2 + 1, -K2:0]
    F[np.ix_(r1 % N1, r2 % N2)] = G[np.ix_(r1 % M1, r2 % M2)] * (N1 * N2 / (M1 * M2))
    return _from_spectrum(cell, F)


def _pad_size(N):
    return 3 * N // 2 + (3 * N // 2) % 2


def multiply(a: PeriodicField, b: PeriodicField) -> PeriodicField:
    """De-aliased pointwise product of two scalars or of a scalar and a vector."""
    _check_same_cell(a, b)
    cell = a.cell
    M1, M2 = _pad_size(cell.N1), _pad_size(cell.N2)
    pa, pb = interpolate_to_grid(a, M1, M2), interpolate_to_grid(b, M1, M2)
    if a.kind == "vector" and b.kind == "vector":
        raise ValueError("use dot() or cross() for two vector fields")
    if a.kind == "vector":
        prod = pa * pb[..., None]
    elif b.kind == "vector":
        prod = pa[..., None] * pb
    else:
        prod = pa * pb
    return _truncate_from_padded(cell, prod)


def cross(a: PeriodicField, b: PeriodicField) -> PeriodicField:
    """De-aliased pointwise cross product of two vector fields."""
    _check_same_cell(a, b)
    cell = a.cell
    M1, M2 = _pad_size(cell.N1), _pad_size(cell.N2)
    return _truncate_from_padded(cell, np.cross(interpolate_to_grid(a, M1, M2), interpolate_to_grid(b, M1, M2)))


def dot(a: PeriodicField, b: PeriodicField) -> PeriodicField:
    _check_same_cell(a, b)
    cell = a.cell
    M1, M2 = _pad_size(cell.N1), _pad_size(cell.N2)
    return _truncate_from_padded(cell, np.sum(interpolate_to_grid(a, M1, M2) * interpolate_to_grid(b, M1, M2), axis=-1))


def random_bandlimited(cell, rng, kmax=None, kind="scalar", decay=1.0):
    """Random real trigonometric polynomial with modes ``|k_i| <= kmax``.

    Coefficients are standard normal, damped by ``exp(-decay*|k|/kmax)`` so
    the samples look like smooth fields rather than noise.
    """
    K1, K2 = cell.band
    if kmax is not None:
        K1, K2 = min(K1, kmax), min(K2, kmax)
    basis = FourierBasis(K1, K2)
    ncomp = 1 if kind == "scalar" else 3
    k = np.hypot(*np.array(basis.real_modes, dtype=float).T)
    damp = np.exp(-decay * k / max(K1, K2, 1))
    coeffs = rng.standard_normal((ncomp, basis.size)) * damp
    if kind == "scalar":
        return basis.synthesize(coeffs[0], cell)
    return basis.synthesize(coeffs, cell)


# --------------------------------------------------------------------------
# Real Fourier basis
# --------------------------------------------------------------------------

class FourierBasis:
    """Real orthonormal basis of trigonometric polynomials with ``|k1|<=K1, |k2|<=K2``.

    Basis functions are ordered as: the constant, then for each wavevector ``k``
    of the half plane (``k1 > 0`` or ``k1 == 0, k2 > 0``) sorted by
    ``(|k|^2, -k1, -k2)`` the pair ``sqrt(2) cos(k.x)``, ``sqrt(2) sin(k.x)``.
    """

    def __init__(self, K1, K2):
        self.K1, self.K2 = int(K1), int(K2)

    def __eq__(self, other):
        return isinstance(other, FourierBasis) and (self.K1, self.K2) == (other.K1, other.K2)

    def __hash__(self):
        return hash((self.K1, self.K2))

    @classmethod
    def for_cell(cls, cell):
        return cls(*cell.band)

    @cached_property
    def half_modes(self):
        H = [(k1, k2) for k1 in range(0, self.K1 + 1) for k2 in range(-self.K2, self.K2 + 1)
             if k1 > 0 or k2 > 0]
        H.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2, -k[0], -k[1]))
        return H

    @cached_property
    def full_modes(self):
        """All wavevectors ``(k1, k2)``, row-major over ``k1`` then ``k2``."""
        k1, k2 = np.meshgrid(np.arange(-self.K1, self.K1 + 1), np.arange(-self.K2, self.K2 + 1), indexing="ij")
        return np.stack([k1.ravel(), k2.ravel()], axis=1)

    def full_index(self, k1, k2):
        return (np.asarray(k1) + self.K1) * (2 * self.K2 + 1) + (np.asarray(k2) + self.K2)

    @property
    def size(self):
        return 1 + 2 * len(self.half_modes)

    @cached_property
    def real_modes(self):
        """Wavevector of each real basis function (the constant has ``(0, 0)``)."""
        out = [(0, 0)]
        for k in self.half_modes:
            out += [k, k]
        return out

    @cached_property
    def _pairs(self):
        H = np.array(self.half_modes, dtype=int).reshape(-1, 2)
        kp = self.full_index(H[:, 0], H[:, 1])
        km = self.full_index(-H[:, 0], -H[:, 1])
        return int(self.full_index(0, 0)), kp, km

    # -- coefficient transforms --------------------------------------------
    def complex_coefficients(self, field):
        """Fourier coefficients ``c(k)`` of ``field`` over ``full_modes``."""
        cell = field.cell
        if self.K1 > cell.N1 // 2 - 1 or self.K2 > cell.N2 // 2 - 1:
            raise ValueError("basis band exceeds grid resolution")
        F = _spectrum(field) / (cell.N1 * cell.N2)
        k = self.full_modes
        return F[k[:, 0] % cell.N1, k[:, 1] % cell.N2]

    def coefficients(self, field) -> np.ndarray:
        """Real coefficient vector; shape ``(size,)`` or ``(3, size)`` for vectors."""
        c = self.complex_coefficients(field)
        if c.ndim == 2:
            return np.stack([self.real_from_complex(c[:, i]) for i in range(3)])
        return self.real_from_complex(c)

    def real_from_complex(self, c):
        k0, kp, km = self._pairs
        s = np.sqrt(0.5)
        out = np.empty(self.size)
        out[0] = np.real(c[k0])
        out[1::2] = np.real(s * (c[kp] + c[km]))
        out[2::2] = np.real(s * 1j * (c[kp] - c[km]))
        return out

    def complex_from_real(self, a):
        k0, kp, km = self._pairs
        s = np.sqrt(0.5)
        c = np.zeros(len(self.full_modes), dtype=complex)
        c[k0] = a[0]
        c[kp] = s * (a[1::2] - 1j * a[2::2])
        c[km] = s * (a[1::2] + 1j * a[2::2])
        return c

    def synthesize(self, coeffs, cell) -> PeriodicField:
        """Field with the given real coefficients (vector if ``coeffs`` is 3 x size)."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim == 2:
            return stack([self.synthesize(c, cell) for c in coeffs])
        N1, N2 = cell.shape
        if self.K1 > N1 // 2 - 1 or self.K2 > N2 // 2 - 1:
            raise ValueError("basis band exceeds grid resolution")
        c = self.complex_from_real(coeffs)
        F = np.zeros((N1, N2), dtype=complex)
        k = self.full_modes
        F[k[:, 0] % N1, k[:, 1] % N2] = c
        return PeriodicField(cell, np.real(np.fft.ifft2(F)) * (N1 * N2))

    def realify(self, A, row_basis=None):
        """Express a complex operator matrix (rows over ``row_basis.full_modes``,
        columns over ``self.full_modes``) in the real bases."""
        row_basis = row_basis or self
        s = np.sqrt(0.5)
        k0, kp, km = self._pairs
        C = np.empty((A.shape[0], self.size), dtype=complex)
        C[:, 0] = A[:, k0]
        C[:, 1::2] = s * (A[:, kp] + A[:, km])
        C[:, 2::2] = s * 1j * (A[:, km] - A[:, kp])
        k0, kp, km = row_basis._pairs
        R = np.empty((row_basis.size, self.size), dtype=complex)
        R[0] = C[k0]
        R[1::2] = s * (C[kp] + C[km])
        R[2::2] = s * 1j * (C[kp] - C[km])
        return np.real(R)

    def embed(self, coeffs, larger: "FourierBasis"):
        """Map real coefficients into a basis with a wider band."""
        return larger.real_from_complex(self._lift(coeffs, larger))

    def _lift(self, coeffs, larger):
        c = self.complex_from_real(coeffs)
        out = np.zeros(len(larger.full_modes), dtype=complex)
        k = self.full_modes
        out[larger.full_index(k[:, 0], k[:, 1])] = c
        return out

    def restrict_from(self, coeffs, larger: "FourierBasis"):
        """Orthogonal projection of coefficients in ``larger`` onto this basis."""
        c = larger.complex_from_real(coeffs)
        k = self.full_modes
        return self.real_from_complex(c[larger.full_index(k[:, 0], k[:, 1])])


def bandwidth(field: PeriodicField, rtol=1e-13):
    """Smallest ``(K1, K2)`` containing all spectral content above ``rtol``."""
    cell = field.cell
    F = np.abs(_spectrum(field))
    if F.ndim == 3:
        F = F.max(axis=-1)
    top = F.max()
    if top == 0:
        return (0, 0)
    k1 = np.abs(np.fft.fftfreq(cell.N1, 1.0 / cell.N1)).astype(int)
    k2 = np.abs(np.fft.fftfreq(cell.N2, 1.0 / cell.N2)).astype(int)
    mask = F > rtol * top
    K1 = int(np.max(np.where(mask, k1[:, None], 0)))
    K2 = int(np.max(np.where(mask, k2[None, :], 0)))
    return (min(K1, cell.band[0]), min(K2, cell.band[1]))


# --------------------------------------------------------------------------
# JSON form
# --------------------------------------------------------------------------

def field_to_dict(field: PeriodicField):
    return {"cell": field.cell.to_dict(), "kind": field.kind, "data": field.data.ravel().tolist()}


def field_from_dict(d) -> PeriodicField:
    cell = UnitCell.from_dict(d["cell"])
    shape = cell.shape if d["kind"] == "scalar" else cell.shape + (3,)
    if d["kind"] not in ("scalar", "vector"):
        raise ValueError(f"unknown field kind {d['kind']!r}")
    return PeriodicField(cell, np.asarray(d["data"], dtype=float).reshape(shape))


def dump_field(field, fp):
    json.dump(field_to_dict(field), fp)


def load_field(fp) -> PeriodicField:
    return field_from_dict(json.load(fp))
