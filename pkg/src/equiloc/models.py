"""Hamiltonian torus actions on complex linear spaces, plus the unit sphere.

Conventions, fixed once for the whole package:

* coordinates on C^n are z_j = x_j + i y_j, real layout (x_1, y_1, ..., x_n, y_n);
* the symplectic form is omega = sum_j dx_j ^ dy_j;
* a rank-r torus acts with integer weight rows w_j in Z^r, the fundamental
  vector field of X is Xt(z)_j = -i <w_j, X> z_j;
* the momentum map pairs as <X, Phi(v)> = -1/2 sum_j <w_j, X> |z_j|^2, so the
  defining identity d Phi_X + iota_Xt omega = 0 holds exactly.

The weight-n circle action on C therefore has momentum -n |z|^2 / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._exact import (
    gcd_list,
    integer_rank,
    rational_nullspace,
    smith_invariant_factors,
)
from .errors import PreconditionError, UnsupportedModelError

ZERO_LEVEL_TOL = 1e-10


@dataclass(frozen=True)
class LinearHamiltonianModel:
    """C^n with a linear torus action given by an n x r integer weight matrix."""

    complex_dim: int
    torus_rank: int
    weights: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        w = tuple(tuple(int(x) for x in row) for row in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) != self.complex_dim:
            raise PreconditionError(
                f"expected {self.complex_dim} weight rows, got {len(w)}")
        if any(len(row) != self.torus_rank for row in w):
            raise PreconditionError("weight row length must equal torus_rank")
        if all(all(x == 0 for x in row) for row in w):
            raise PreconditionError("weight matrix must have a nonzero row")

    @property
    def weight_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=np.int64)

    def as_complex(self, v) -> np.ndarray:
        """Accept a complex n-vector or a real 2n-vector (x1, y1, ...)."""
        a = np.asarray(v)
        if np.iscomplexobj(a):
            a = a.reshape(self.complex_dim).astype(np.complex128)
            return a
        a = a.astype(np.float64).reshape(-1)
        if a.size == self.complex_dim:
            return a.astype(np.complex128)
        if a.size == 2 * self.complex_dim:
            return a[0::2] + 1j * a[1::2]
        raise PreconditionError(
            f"point has {a.size} coordinates, expected {self.complex_dim} "
            f"complex or {2 * self.complex_dim} real")

    def momentum_covector(self, v) -> np.ndarray:
        z = self.as_complex(v)
        s = np.abs(z) ** 2
        return -0.5 * (self.weight_array.T @ s)

    def fundamental_field(self, v, X) -> np.ndarray:
        z = self.as_complex(v)
        a = self.weight_array @ np.asarray(X, dtype=np.float64).reshape(self.torus_rank)
        return -1j * a * z

    def phase(self, v, X, eta=None) -> float:
        J = self.momentum_covector(v)
        if eta is not None:
            J = J - np.asarray(eta, dtype=np.float64).reshape(self.torus_rank)
        return float(J @ np.asarray(X, dtype=np.float64).reshape(self.torus_rank))

    def primitive_data(self) -> tuple[int, tuple[int, ...]]:
        """gcd of the nonzero rank-1 weights and the primitive weight vector."""
        if self.torus_rank != 1:
            raise UnsupportedModelError(
                "primitive weight data is defined for rank-1 actions")
        col = [row[0] for row in self.weights]
        g = gcd_list(c for c in col if c != 0)
        return g, tuple(c // g for c in col)


@dataclass(frozen=True)
class SphereModel:
    """Unit sphere with the standard circle action; J(p)(Y) = Y * height.

    The area form in cylindrical coordinates (height z, angle phi) is
    dz ^ dphi, total area 4 pi.  ``grid`` controls the quadrature resolution.
    """

    grid: int = 200
    radius: float = field(default=1.0, init=False)

    @property
    def torus_rank(self) -> int:
        return 1

    def quad_nodes(self):
        z, wz = np.polynomial.legendre.leggauss(self.grid)
        nphi = 2 * self.grid
        phi = 2.0 * math.pi * np.arange(nphi) / nphi
        wphi = np.full(nphi, 2.0 * math.pi / nphi)
        return z, wz, phi, wphi

    def surface_integral(self, f) -> complex:
        """Integrate f(z, phi) against the area form dz dphi."""
        z, wz, phi, wphi = self.quad_nodes()
        vals = f(z[:, None], phi[None, :])
        vals = np.broadcast_to(vals, (z.size, phi.size))
        return complex(np.einsum("i,j,ij->", wz, wphi, vals))

    def momentum_covector(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64).reshape(3)
        return np.array([p[2]])


@dataclass(frozen=True)
class IsotropyDatum:
    """Stabilizer data of a point: Lie-algebra dimension and, when that is
    zero, the order of the finite stabilizer group."""

    algebra_dim: int
    finite_order: int | str

    def __post_init__(self):
        if self.algebra_dim == 0:
            if not isinstance(self.finite_order, int) or self.finite_order < 1:
                raise PreconditionError("finite stabilizer needs a positive order")
        elif self.finite_order != "infinite":
            raise PreconditionError(
                "positive-dimensional stabilizer must be marked infinite")


@dataclass(frozen=True)
class SliceDecomposition:
    """Splitting attached to the stabilizer of a point: the subalgebra h,
    a complement m, and the coordinate index sets V_H (zero weight under h)
    and W (the rest)."""

    stabilizer_subalgebra: tuple[tuple[Fraction, ...], ...]
    complement: tuple[tuple[Fraction, ...], ...]
    fixed_indices: tuple[int, ...]
    moving_indices: tuple[int, ...]


def _active_rows(model: LinearHamiltonianModel, v, tol: float) -> list[int]:
    z = model.as_complex(v)
    scale = max(1.0, float(np.max(np.abs(z))) if z.size else 1.0)
    return [j for j in range(model.complex_dim) if abs(z[j]) > tol * scale]


def momentum_map(model, v) -> np.ndarray:
    """Momentum covector of a point, exactly (no quadrature)."""
    return model.momentum_covector(v)


def momentum_defect(model, v, X, h: float = 1e-5) -> float:
    """Max residual of d J_X + iota_{Xt} omega over coordinate directions,
    with d J_X taken by central differences of step h."""
    if isinstance(model, SphereModel):
        Y = float(np.asarray(X).reshape(1)[0])
        z0, phi0 = float(np.asarray(v).reshape(2)[0]), float(np.asarray(v).reshape(2)[1])

        def J(z, phi):
            return Y * z

        # omega = dz ^ dphi, Xt = Y d_phi, so iota_Xt omega = -Y dz
        dz = (J(z0 + h, phi0) - J(z0 - h, phi0)) / (2 * h)
        dphi = (J(z0, phi0 + h) - J(z0, phi0 - h)) / (2 * h)
        return max(abs(dz - Y), abs(dphi))

    z = model.as_complex(v)
    n = model.complex_dim
    Xv = np.asarray(X, dtype=np.float64).reshape(model.torus_rank)
    xt = model.fundamental_field(z, Xv)
    base = np.empty(2 * n)
    base[0::2], base[1::2] = z.real, z.imag

    def JX(pt):
        return float(model.momentum_covector(pt) @ Xv)

    worst = 0.0
    for i in range(2 * n):
        e = np.zeros(2 * n)
        e[i] = 1.0
        fd = (JX(base + h * e) - JX(base - h * e)) / (2 * h)
        j, is_y = divmod(i, 2)
        iota = xt[j].real if is_y else -xt[j].imag
        worst = max(worst, abs(fd + iota))
    return worst


def isotropy(model: LinearHamiltonianModel, v, tol: float = 0.0) -> IsotropyDatum:
    """Stabilizer of a point, scale invariant: dimension of the common null
    space of the active weight rows, and the finite order via the Smith
    normal form of the active-weight integer matrix."""
    active = _active_rows(model, v, tol)
    rows = [model.weights[j] for j in active]
    rank = integer_rank(rows) if rows else 0
    dim = model.torus_rank - rank
    if dim > 0:
        return IsotropyDatum(dim, "infinite")
    order = 1
    for d in smith_invariant_factors(rows):
        order *= d
    return IsotropyDatum(0, order)


def slice_decomposition(model: LinearHamiltonianModel, v, tol: float = 0.0) -> SliceDecomposition:
    """Stabilizer subalgebra h, a complement, and the index split of C^n into
    the h-fixed block V_H and its moving complement W."""
    active = _active_rows(model, v, tol)
    rows = [model.weights[j] for j in active]
    h_basis = rational_nullspace(rows, model.torus_rank) if rows else \
        [[Fraction(1 if i == k else 0) for i in range(model.torus_rank)]
         for k in range(model.torus_rank)]
    # complement: exact row-space basis of the active rows
    comp: list[list[Fraction]] = []
    work = [[Fraction(x) for x in row] for row in rows]
    pivots = []
    for row in work:
        red = list(row)
        for prow, pcol in zip(comp, pivots):
            if red[pcol] != 0:
                f = red[pcol] / prow[pcol]
                red = [a - f * b for a, b in zip(red, prow)]
        nz = next((k for k, x in enumerate(red) if x != 0), None)
        if nz is not None:
            comp.append(red)
            pivots.append(nz)
    fixed = []
    moving = []
    for j, w in enumerate(model.weights):
        if all(sum(Fraction(wk) * hk for wk, hk in zip(w, hv)) == 0 for hv in h_basis):
            fixed.append(j)
        else:
            moving.append(j)
    return SliceDecomposition(
        stabilizer_subalgebra=tuple(tuple(x for x in hv) for hv in h_basis),
        complement=tuple(tuple(x for x in row) for row in comp),
        fixed_indices=tuple(fixed),
        moving_indices=tuple(moving),
    )


def transversal_hessian_det(model: LinearHamiltonianModel, p, X) -> float:
    """Determinant of Xi - L_X o L_X on the tangent of the orbit through a
    regular zero-level point.

    Xi is the Gram operator of the fundamental fields; for a torus the
    bracket term L_X vanishes identically, so the result is the Gram
    determinant det [ sum_j w_jk w_jl |z_j|^2 ], a positive real.
    """
    z = model.as_complex(p)
    J = model.momentum_covector(z)
    norm2 = float(np.sum(np.abs(z) ** 2))
    if float(np.linalg.norm(J)) > ZERO_LEVEL_TOL * (1.0 + norm2):
        raise PreconditionError(
            f"point is off the zero level: |J| = {np.linalg.norm(J):.3e} "
            f"exceeds {ZERO_LEVEL_TOL:.1e}*(1+|p|^2)")
    iso = isotropy(model, z)
    if iso.algebra_dim != 0:
        raise PreconditionError(
            f"stabilizer has dimension {iso.algebra_dim}; the transversal "
            "Hessian needs a finite stabilizer")
    Xv = np.asarray(X, dtype=np.float64).reshape(model.torus_rank)
    if float(np.linalg.norm(Xv)) > ZERO_LEVEL_TOL:
        raise PreconditionError(
            "X must lie in the stabilizer algebra, which is zero here")
    s = np.abs(z) ** 2
    w = model.weight_array.astype(np.float64)
    gram = w.T @ (s[:, None] * w)
    return float(np.linalg.det(gram))
