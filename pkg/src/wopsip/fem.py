"""Discrete spaces and operators on fully discontinuous meshes.

The scalar space is the discontinuous Crouzeix-Raviart space: every cell
carries d+1 degrees of freedom, one per face, equal to the face mean of
the trace.  No DOF is shared between cells, so the global index of local
face i on cell j is simply j*(d+1)+i.  Because the CR basis spans the full
local P1 space, this basis is used for every piecewise-linear field in the
package; the face-mean projection of a jump then reduces to a difference
of two coefficients.

The vector side is the lowest-order Raviart-Thomas space used locally:
fields a + b*x with face-flux degrees of freedom (outward normals, so the
orientation factor is +1).  Its interpolation operator commutes with the
cellwise L2 projection of the divergence, which ``commuting_check``
measures.

All operators are pure per-cell computations; global interpolation writes
disjoint coefficient ranges per cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Simplex, face_geometry, measure
from .mesh import Mesh
from .quadrature import DEFAULT_FACE_DEGREE, DEFAULT_VOLUME_DEGREE, simplex_rule


@dataclass(frozen=True)
class DofMap:
    """One DOF per (cell, face) pair; nothing is shared between cells."""

    n_cells: int
    n_local: int

    @property
    def total_dofs(self) -> int:
        return self.n_cells * self.n_local

    def index(self, cell: int, local: int) -> int:
        return cell * self.n_local + local

    def cell_dofs(self, cell: int) -> np.ndarray:
        return cell * self.n_local + np.arange(self.n_local)


def dof_map(mesh: Mesh) -> DofMap:
    return DofMap(mesh.n_cells, mesh.dim + 1)


@dataclass
class FeField:
    """Piecewise-linear field in the discontinuous CR basis."""

    mesh: Mesh
    coefficients: np.ndarray
    space: str = "CR"

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        expected = self.mesh.n_cells * (self.mesh.dim + 1)
        if self.coefficients.shape != (expected,):
            raise ValueError(f"expected {expected} coefficients")

    @property
    def cell_coefficients(self) -> np.ndarray:
        """View of shape (n_cells, d+1)."""
        return self.coefficients.reshape(self.mesh.n_cells, self.mesh.dim + 1)

    def cell_gradients(self) -> np.ndarray:
        """Constant gradient per cell, shape (n_cells, d)."""
        d = self.mesh.dim
        return -d * np.einsum("ci,cid->cd", self.cell_coefficients,
                              self.mesh.grad_lambda)

    def values_at_barycentric(self, bary: np.ndarray) -> np.ndarray:
        """Values at the same barycentric points in every cell, (n_cells, Q)."""
        theta = cr_basis_barycentric(bary)
        return self.cell_coefficients @ theta.T

    def evaluate(self, cell: int, x) -> np.ndarray:
        """Polynomial evaluation of the cell-local function (any x in R^d)."""
        lam = cell_barycentric(self.mesh, np.asarray([cell]), np.asarray(x, dtype=float)[None])
        theta = cr_basis_barycentric(lam[0])
        return theta @ self.cell_coefficients[cell]


def cr_basis_barycentric(bary: np.ndarray) -> np.ndarray:
    """CR basis values d*(1/d - lambda_i) at barycentric points, (..., d+1)."""
    bary = np.asarray(bary, dtype=float)
    d = bary.shape[-1] - 1
    return d * (1.0 / d - bary)


def cell_barycentric(mesh: Mesh, cells: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of points x[c, q] with respect to cells[c].

    ``cells`` has shape (C,), ``x`` shape (C, Q, d); result (C, Q, d+1).
    """
    p0 = mesh.vertices[mesh.cells[cells, 0]]
    rel = x - p0[:, None, :]
    lam = np.einsum("cqd,ckd->cqk", rel, mesh.grad_lambda[cells, 1:, :])
    lam0 = 1.0 - lam.sum(axis=-1, keepdims=True)
    return np.concatenate([lam0, lam], axis=-1)


def _simplex_barycentric(simplex: Simplex, x: np.ndarray) -> np.ndarray:
    v = simplex.vertices
    mat = np.vstack([v.T, np.ones(len(v))])
    x = np.asarray(x, dtype=float)
    rhs = np.concatenate([np.atleast_2d(x), np.ones((np.atleast_2d(x).shape[0], 1))],
                         axis=1)
    lam = np.linalg.solve(mat, rhs.T).T
    return lam if x.ndim > 1 else lam[0]


def cr_basis(simplex: Simplex, i: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Value and (constant) gradient of the CR basis function of face i."""
    d = simplex.dim
    lam = _simplex_barycentric(simplex, x)
    value = d * (1.0 / d - lam[..., i])
    v = simplex.vertices
    mat = np.vstack([v.T, np.ones(d + 1)])
    grad = np.linalg.inv(mat)[i, :d] * (-d)
    return value, grad


def face_vertices_of(simplex: Simplex, i: int) -> np.ndarray:
    return np.delete(simplex.vertices, i, axis=0)


def cr_dof(phi, simplex: Simplex, i: int, degree: int = DEFAULT_FACE_DEGREE) -> float:
    """Face-mean degree of freedom (1/|F|) int_F phi ds via face quadrature."""
    rule = simplex_rule(simplex.dim - 1, degree)
    fv = face_vertices_of(simplex, i)
    pts = rule.points @ fv
    return float(np.dot(rule.weights, np.asarray(phi(pts), dtype=float)))


def cr_interpolate_local(simplex: Simplex, phi,
                         degree: int = DEFAULT_FACE_DEGREE) -> np.ndarray:
    """CR interpolation coefficients (face means) on a single simplex."""
    return np.array([cr_dof(phi, simplex, i, degree)
                     for i in range(simplex.dim + 1)])


def cr_interpolate_global(mesh: Mesh, phi,
                          degree: int = DEFAULT_FACE_DEGREE) -> FeField:
    """Interpolate a scalar function by face means, cell by cell.

    Each face mean is computed once and written to both adjacent cells, so
    interior face-mean jumps of the result vanish identically.
    """
    rule = simplex_rule(mesh.dim - 1, degree)
    pts = np.einsum("qk,fkd->fqd", rule.points, mesh.face_points())
    vals = np.asarray(phi(pts.reshape(-1, mesh.dim)), dtype=float)
    means = vals.reshape(mesh.n_faces, len(rule)) @ rule.weights

    coeffs = np.zeros((mesh.n_cells, mesh.dim + 1))
    for side in range(2):
        have = mesh.face_cells[:, side] >= 0
        coeffs[mesh.face_cells[have, side], mesh.face_local[have, side]] = means[have]
    return FeField(mesh, coeffs.ravel())


@dataclass(frozen=True)
class RtLocalField:
    """Lowest-order Raviart-Thomas field v(x) = a + b x on one cell."""

    a: np.ndarray
    b: float

    def __call__(self, x) -> np.ndarray:
        return self.a + self.b * np.asarray(x, dtype=float)

    @property
    def divergence(self) -> float:
        return self.b * len(self.a)


def rt_basis(simplex: Simplex, i: int, x) -> np.ndarray:
    """RT shape function (x - P_i) / (d |T|) with outward-normal orientation."""
    d = simplex.dim
    return (np.asarray(x, dtype=float) - simplex.vertices[i]) / (d * measure(simplex))


def rt_dof(v, simplex: Simplex, i: int, degree: int = DEFAULT_FACE_DEGREE) -> float:
    """Outward flux int_F v . n ds of the face opposite vertex i."""
    area, normal = face_geometry(simplex, i)
    rule = simplex_rule(simplex.dim - 1, degree)
    pts = rule.points @ face_vertices_of(simplex, i)
    vals = np.asarray(v(pts), dtype=float) @ normal
    return area * float(np.dot(rule.weights, vals))


def rt_interpolate(simplex: Simplex, v,
                   degree: int = DEFAULT_FACE_DEGREE) -> RtLocalField:
    """Flux-matching interpolation onto the local RT space."""
    d = simplex.dim
    vol = measure(simplex)
    fluxes = np.array([rt_dof(v, simplex, i, degree) for i in range(d + 1)])
    b = fluxes.sum() / (d * vol)
    a = -(fluxes @ simplex.vertices) / (d * vol)
    return RtLocalField(a, float(b))


def l2_project_cell(simplex: Simplex, phi,
                    degree: int = DEFAULT_VOLUME_DEGREE) -> float:
    """Cell mean (the P0 L2 projection)."""
    rule = simplex_rule(simplex.dim, degree)
    pts = rule.points @ simplex.vertices
    return float(np.dot(rule.weights, np.asarray(phi(pts), dtype=float)))


def l2_project_face(face_vertices: np.ndarray, phi,
                    degree: int = DEFAULT_FACE_DEGREE) -> float:
    """Face mean (the P0 L2 projection on a face given by its vertices)."""
    face_vertices = np.asarray(face_vertices, dtype=float)
    rule = simplex_rule(face_vertices.shape[0] - 1, degree)
    pts = rule.points @ face_vertices
    return float(np.dot(rule.weights, np.asarray(phi(pts), dtype=float)))


def face_mean_jump(field: FeField, face: int) -> float:
    """Face-mean projection of the jump across a face.

    Interior faces: owner-cell coefficient minus neighbour coefficient
    (consistent with the fixed owner-outward normal).  Boundary faces: the
    single cell's coefficient.
    """
    mesh = field.mesh
    cells = mesh.face_cells[face]
    locals_ = mesh.face_local[face]
    coeffs = field.cell_coefficients
    value = coeffs[cells[0], locals_[0]]
    if cells[1] >= 0:
        value = value - coeffs[cells[1], locals_[1]]
    return float(value)


def rt_interpolate_mesh(mesh: Mesh, v, degree: int = DEFAULT_FACE_DEGREE):
    """RT interpolation of a smooth vector field on every cell at once.

    Returns (a, b) with a of shape (n_cells, d) and b of shape (n_cells,),
    describing a + b x per cell.  Face fluxes are computed once per global
    face against the owner normal and reused with the matching sign.
    """
    rule = simplex_rule(mesh.dim - 1, degree)
    pts = np.einsum("qk,fkd->fqd", rule.points, mesh.face_points())
    vals = np.asarray(v(pts.reshape(-1, mesh.dim)), dtype=float)
    vals = vals.reshape(mesh.n_faces, len(rule), mesh.dim)
    fluxes = mesh.face_measures * np.einsum(
        "fqd,fd,q->f", vals, mesh.face_normals, rule.weights)

    d = mesh.dim
    total = np.zeros(mesh.n_cells)
    moment = np.zeros((mesh.n_cells, d))
    opp = mesh.vertices[mesh.cells]  # (Ne, d+1, d)
    for side, sign in ((0, 1.0), (1, -1.0)):
        have = mesh.face_cells[:, side] >= 0
        cells = mesh.face_cells[have, side]
        locs = mesh.face_local[have, side]
        np.add.at(total, cells, sign * fluxes[have])
        np.add.at(moment, cells, sign * fluxes[have, None] * opp[cells, locs])
    b = total / (d * mesh.cell_volumes)
    a = -moment / (d * mesh.cell_volumes)[:, None]
    return a, b


def commuting_check(mesh: Mesh, v, div_v,
                    degree: int = DEFAULT_VOLUME_DEGREE) -> float:
    """Max over cells of |div(RT interpolant of v) - cell mean of div v|.

    ``v`` and ``div_v`` are vectorized callables; the divergence must be
    the analytic one so the residual reflects only the commuting property
    and quadrature exactness.
    """
    a, b = rt_interpolate_mesh(mesh, v, degree=max(degree, 2))
    div_rt = mesh.dim * b
    rule = simplex_rule(mesh.dim, degree)
    pts = np.einsum("qk,ckd->cqd", rule.points, mesh.cell_points())
    dv = np.asarray(div_v(pts.reshape(-1, mesh.dim)), dtype=float)
    means = dv.reshape(mesh.n_cells, len(rule)) @ rule.weights
    return float(np.abs(div_rt - means).max())
