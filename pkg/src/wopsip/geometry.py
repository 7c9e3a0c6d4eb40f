"""Element-local geometry for simplicial elements in 2D and 3D.

Provides simplex measures, face areas and outward normals, the
vertex-to-face length ``ell = d! |T| / |F|`` used by all penalty
parameters, the anisotropic edge characterization (direction lengths
``h_i``, unit directions ``r_i``, shape parameter ``H_T``), affine maps
and their diagonal/shear/orthogonal factorization, and the Piola
transformation for vector fields.

Everything here is immutable after construction; all operations are pure
functions and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable

import numpy as np

from .errors import DegenerateSimplex, SingularMap

TYPE_I = 1
TYPE_II = 2

#: Relative degeneracy threshold: a simplex is rejected when its volume is
#: below ``VOLUME_RTOL * h_T**d``.  Relative, because anisotropic elements
#: have tiny volumes by design.
VOLUME_RTOL = 1e-14


def _edge_matrix(vertices: np.ndarray) -> np.ndarray:
    """Rows are the edge vectors from vertex 0 to vertices 1..d."""
    return vertices[1:] - vertices[0]


def _volume_from_vertices(vertices: np.ndarray) -> float:
    d = vertices.shape[1]
    return abs(float(np.linalg.det(_edge_matrix(vertices)))) / math.factorial(d)


def _diameter(vertices: np.ndarray) -> float:
    n = len(vertices)
    return max(
        float(np.linalg.norm(vertices[a] - vertices[b]))
        for a, b in combinations(range(n), 2)
    )


@dataclass(frozen=True)
class Simplex:
    """A non-degenerate d-simplex in R^d with d in {2, 3}.

    ``vertices`` has shape (d+1, d).  Construction validates shape and the
    relative volume threshold.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] + 1 or v.shape[1] not in (2, 3):
            raise ValueError(f"expected (d+1, d) vertex array with d in {{2,3}}, got {v.shape}")
        object.__setattr__(self, "vertices", v)
        h = self.diameter
        if _volume_from_vertices(v) < VOLUME_RTOL * h ** self.dim:
            raise DegenerateSimplex(f"simplex volume below {VOLUME_RTOL} * h_T^d")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def diameter(self) -> float:
        return _diameter(self.vertices)

    def edges(self):
        """All (i, j) local index pairs with i < j."""
        return list(combinations(range(self.dim + 1), 2))

    def edge_length(self, i: int, j: int) -> float:
        return float(np.linalg.norm(self.vertices[i] - self.vertices[j]))


def measure(simplex: Simplex) -> float:
    """d-volume |T|_d = |det(edge matrix)| / d!."""
    vol = _volume_from_vertices(simplex.vertices)
    if vol < VOLUME_RTOL * simplex.diameter ** simplex.dim:
        raise DegenerateSimplex("degenerate simplex in measure()")
    return vol


def face_geometry(simplex: Simplex, opposite_vertex: int) -> tuple[float, np.ndarray]:
    """Measure |F|_{d-1} and unit outward normal of the face opposite a vertex."""
    d = simplex.dim
    face = np.delete(simplex.vertices, opposite_vertex, axis=0)
    if d == 2:
        e = face[1] - face[0]
        area = float(np.linalg.norm(e))
        normal = np.array([e[1], -e[0]]) / area
    else:
        cr = np.cross(face[1] - face[0], face[2] - face[0])
        nrm = float(np.linalg.norm(cr))
        area = 0.5 * nrm
        normal = cr / nrm
    if area <= 0.0 or not np.isfinite(area):
        raise DegenerateSimplex("zero-measure face")
    # orient away from the opposite vertex
    if float(np.dot(normal, simplex.vertices[opposite_vertex] - face[0])) > 0.0:
        normal = -normal
    return area, normal


def ell(simplex: Simplex, opposite_vertex: int) -> float:
    """Vertex-to-face length ell = d! |T|_d / |F|_{d-1}.

    In 2D this is the altitude from the opposite vertex onto the face; in
    3D it equals twice that altitude (the formula, not the raw distance,
    is what enters the penalty parameters and weights).
    """
    area, _ = face_geometry(simplex, opposite_vertex)
    return math.factorial(simplex.dim) * measure(simplex) / area


@dataclass(frozen=True)
class ElementCharacterization:
    """Ordered vertices, direction frame and shape parameter of a simplex.

    ``order`` is a permutation of the local vertex indices giving
    (p_1, ..., p_{d+1}); ``h`` the direction lengths (h_1, ..., h_d);
    ``r`` the unit direction vectors as rows; ``shape_type`` is TYPE_I or
    TYPE_II (3D only; 2D is always TYPE_I); ``H_over_h`` the ratio
    H_T / h_T with H_T = (prod h_i / |T|_d) h_T.  ``label_conflict``
    flags 3D elements whose labelling had to be repaired off-recipe.
    """

    order: tuple[int, ...]
    h: np.ndarray
    r: np.ndarray
    shape_type: int
    H_over_h: float
    label_conflict: bool = False


def _unit(v: np.ndarray) -> np.ndarray:
    return v / float(np.linalg.norm(v))


def _argext_edge(simplex, pairs, ids, longest: bool):
    """Pick the extremal-length edge; ties go to the smallest sorted id pair."""
    best = None
    for (a, b) in pairs:
        length = simplex.edge_length(a, b)
        key = tuple(sorted((ids[a], ids[b])))
        cand = (length, key, (a, b))
        if best is None:
            best = cand
            continue
        if longest:
            if length > best[0] or (length == best[0] and key < best[1]):
                best = cand
        else:
            if length < best[0] or (length == best[0] and key < best[1]):
                best = cand
    return best[2]


def _characterize_2d(simplex: Simplex, ids) -> ElementCharacterization:
    # longest edge is (p_2, p_3); the remaining vertex is p_1
    a, b = _argext_edge(simplex, simplex.edges(), ids, longest=True)
    p1 = ({0, 1, 2} - {a, b}).pop()
    da = simplex.edge_length(p1, a)
    db = simplex.edge_length(p1, b)
    if da > db or (da == db and ids[a] < ids[b]):
        p2, p3 = a, b
    else:
        p2, p3 = b, a
    v = simplex.vertices
    h1 = simplex.edge_length(p1, p2)
    h2 = simplex.edge_length(p1, p3)
    r = np.vstack([_unit(v[p2] - v[p1]), _unit(v[p3] - v[p1])])
    H_over_h = h1 * h2 / measure(simplex)
    return ElementCharacterization((p1, p2, p3), np.array([h1, h2]), r, TYPE_I, H_over_h)


def _characterize_3d(simplex: Simplex, ids) -> ElementCharacterization:
    v = simplex.vertices
    edges = simplex.edges()
    lmin = _argext_edge(simplex, edges, ids, longest=False)
    h2 = simplex.edge_length(*lmin)
    adjacent = [e for e in edges if e != lmin and (set(e) & set(lmin))]
    lmax = _argext_edge(simplex, adjacent, ids, longest=True)
    shared = (set(lmax) & set(lmin)).pop()
    other = (set(lmax) - {shared}).pop()
    p3 = (set(lmin) - {shared}).pop()
    p4 = ({0, 1, 2, 3} - set(lmax) - {p3}).pop()

    # half-space test: plane through the midpoint of lmax, normal p_1 - p_2
    mid = 0.5 * (v[lmax[0]] + v[lmax[1]])
    direction = v[lmax[1]] - v[lmax[0]]
    sigma = lambda k: float(np.dot(v[k] - mid, direction))
    same_side = sigma(p3) * sigma(p4) > 0.0

    conflict = False
    if same_side:
        shape_type = TYPE_I
        p1, p2 = shared, other
    else:
        shape_type = TYPE_II
        p1, p2 = other, shared
    # p_1 and p_4 must share a half-space; the endpoints of lmax sit on
    # opposite sides, so at most one swap repairs the labelling.  Repairing
    # a TYPE_I element leaves the min-edge endpoints in the TYPE_II
    # arrangement, so it is relabelled and flagged.
    if sigma(p1) * sigma(p4) < 0.0:
        p1, p2 = p2, p1
        if shape_type == TYPE_I:
            shape_type = TYPE_II
            conflict = True

    h1 = simplex.edge_length(p1, p2)
    h3 = simplex.edge_length(p1, p4)
    r1 = _unit(v[p2] - v[p1])
    r3 = _unit(v[p4] - v[p1])
    if shape_type == TYPE_I:
        r2 = _unit(v[p3] - v[p1])
    else:
        r2 = _unit(v[p3] - v[p2])
    H_over_h = h1 * h2 * h3 / measure(simplex)
    return ElementCharacterization(
        (p1, p2, p3, p4), np.array([h1, h2, h3]), np.vstack([r1, r2, r3]),
        shape_type, H_over_h, conflict)


def characterize(simplex: Simplex, vertex_ids=None) -> ElementCharacterization:
    """Order the vertices and build the anisotropic direction frame.

    2D: the longest edge becomes (p_2, p_3) and h_2 <= h_1.  3D: h_2 is
    the minimum edge length, h_1 the longest edge adjacent to it, and the
    perpendicular-bisector half-space test fixes the Type I / Type II tag
    and the labelling.  Ties are broken by the lexicographically smallest
    sorted ``vertex_ids`` pair (local indices when ids are not given), so
    the result is deterministic.
    """
    ids = tuple(range(simplex.dim + 1)) if vertex_ids is None else tuple(vertex_ids)
    if simplex.dim == 2:
        return _characterize_2d(simplex, ids)
    return _characterize_3d(simplex, ids)


@dataclass(frozen=True)
class AffineMap:
    """x -> matrix @ x + offset with an invertible matrix."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        b = np.asarray(self.offset, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or b.shape != (m.shape[0],):
            raise ValueError("matrix must be square and offset of matching length")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", b)
        if abs(float(np.linalg.det(m))) < 1e-300:
            raise SingularMap("affine map matrix is singular")

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.matrix.T + self.offset

    def inverse(self) -> "AffineMap":
        inv = np.linalg.inv(self.matrix)
        return AffineMap(inv, -inv @ self.offset)

    def compose(self, other: "AffineMap") -> "AffineMap":
        """self after other: x -> self(other(x))."""
        return AffineMap(self.matrix @ other.matrix,
                         self.matrix @ other.offset + self.offset)


def affine_map_between(source: Simplex, target: Simplex) -> AffineMap:
    """The unique affine map sending source vertices to target vertices in order."""
    es = _edge_matrix(source.vertices)
    et = _edge_matrix(target.vertices)
    # rows of e* are edge vectors, so A maps es^T -> et^T
    a = np.linalg.solve(es, et).T
    b = target.vertices[0] - a @ source.vertices[0]
    return AffineMap(a, b)


def piola(map: AffineMap, reference_field: Callable) -> Callable:
    """Contravariant push-forward v(x) = A vhat(Phi^{-1} x) / det A.

    Preserves face fluxes up to the orientation sign and scales the
    divergence by 1/det A.
    """
    inv = map.inverse()
    a = map.matrix
    det = map.det

    def physical_field(x):
        vhat = np.asarray(reference_field(inv.apply(x)), dtype=float)
        return vhat @ a.T / det

    return physical_field


def reference_simplex(dim: int, shape_type: int = TYPE_I) -> Simplex:
    """Reference triangle, or the Type I / Type II reference tetrahedron."""
    if dim == 2:
        return Simplex(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    if shape_type == TYPE_I:
        return Simplex(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                                 [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    return Simplex(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                             [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))


def affine_factorization(simplex: Simplex, chi: ElementCharacterization):
    """Reconstruct Phi = (orthogonal) o (shear) o (diagonal) from a characterization.

    Returns (A_hat, A_tilde, A_orth, offset) with A_hat = diag(h_i),
    A_tilde unit upper triangular shear columns scaled by unit parameters,
    and A_orth orthogonal, such that x = A_orth @ A_tilde @ A_hat @ xhat
    + offset maps the matching reference simplex onto the ordered
    vertices.  Used only as a verification probe; assembly uses the direct
    vertex-based map.
    """
    d = simplex.dim
    v = simplex.vertices[list(chi.order)]
    r = chi.r
    h = chi.h
    e1 = r[0]
    u = r[1] - float(np.dot(r[1], e1)) * e1
    t1 = float(np.linalg.norm(u))
    e2 = u / t1
    if d == 2:
        s1 = float(np.dot(r[1], e1))
        a_tilde = np.array([[1.0, s1], [0.0, t1]])
        a_orth = np.column_stack([e1, e2])
    else:
        w = r[2] - float(np.dot(r[2], e1)) * e1 - float(np.dot(r[2], e2)) * e2
        t2 = float(np.linalg.norm(w))
        e3 = w / t2
        s21 = float(np.dot(r[2], e1))
        s22 = float(np.dot(r[2], e2))
        if chi.shape_type == TYPE_I:
            s1 = float(np.dot(r[1], e1))
        else:
            s1 = -float(np.dot(r[1], e1))
            t1 = float(np.dot(r[1], e2))
        a_tilde = np.array([[1.0, s1 if chi.shape_type == TYPE_I else -s1, s21],
                            [0.0, t1, s22],
                            [0.0, 0.0, t2]])
        a_orth = np.column_stack([e1, e2, e3])
    a_hat = np.diag(h)
    return a_hat, a_tilde, a_orth, v[0].copy()
