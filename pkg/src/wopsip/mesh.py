"""Conformal simplicial meshes, face connectivity and mesh families.

A mesh stores vertices, positively oriented cells, and a face table with
interior/boundary classification.  For every face the cell of smaller
index owns the fixed unit normal ``n_F`` (it points out of the owner).
Per-cell barycentric gradients, volumes and the vertex-to-face lengths
``ell`` are precomputed so assembly and norm evaluation never recompute
local geometry.

Generators produce the structured families used in the experiments:
right-triangle splits of the unit square (optionally graded towards
y = 0), criss-cross splits, and the six-tetrahedra box split of the unit
cube.  Meshes are immutable after ``build_connectivity``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, permutations

import numpy as np

from .errors import DegenerateSimplex, InvalidParameter, NonConformal
from .geometry import Simplex, characterize

VTK_TRIANGLE = 5
VTK_TETRA = 10


@dataclass
class Mesh:
    """Simplicial mesh with full face connectivity (immutable by convention)."""

    dim: int
    vertices: np.ndarray        # (Nv, d)
    cells: np.ndarray           # (Ne, d+1) int, positively oriented
    face_vertices: np.ndarray   # (Nf, d) int, sorted tuples
    face_cells: np.ndarray      # (Nf, 2) int, owner then neighbour (-1 on boundary)
    face_local: np.ndarray      # (Nf, 2) int, local opposite-vertex index per side
    cell_faces: np.ndarray      # (Ne, d+1) int, face id opposite each local vertex
    cell_volumes: np.ndarray    # (Ne,)
    cell_diameters: np.ndarray  # (Ne,)
    grad_lambda: np.ndarray     # (Ne, d+1, d) gradients of barycentric coordinates
    face_measures: np.ndarray   # (Nf,)
    face_normals: np.ndarray    # (Nf, d), outward for the owner cell
    face_ell: np.ndarray        # (Nf, 2) ell = d!|T|/|F| per side (nan on boundary)

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_faces(self) -> int:
        return self.face_vertices.shape[0]

    @property
    def h(self) -> float:
        return float(self.cell_diameters.max())

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] >= 0)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] < 0)

    def cell_simplex(self, j: int) -> Simplex:
        return Simplex(self.vertices[self.cells[j]])

    def cell_points(self) -> np.ndarray:
        """Vertex coordinates per cell, shape (Ne, d+1, d)."""
        return self.vertices[self.cells]

    def face_points(self) -> np.ndarray:
        """Vertex coordinates per face, shape (Nf, d, d)."""
        return self.vertices[self.face_vertices]


@dataclass(frozen=True)
class MeshStats:
    """Global mesh-quality numbers."""

    h: float
    min_h: float
    max_angle: float
    gamma0: float
    max_aspect: float
    cell_count: int
    face_count: int
    boundary_face_count: int


def build_connectivity(vertices, cells) -> Mesh:
    """Build the face table and local geometry for a conformal mesh.

    Cells are reoriented to positive signed volume.  Raises NonConformal
    when a face is shared by more than two cells or the boundary faces do
    not close up (the visible symptom of hanging nodes), and
    DegenerateSimplex for flat cells.
    """
    vertices = np.asarray(vertices, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
        raise InvalidParameter("vertices must be (Nv, d) with d in {2, 3}")
    d = vertices.shape[1]
    if cells.ndim != 2 or cells.shape[1] != d + 1:
        raise InvalidParameter("cells must be (Ne, d+1)")
    if cells.min(initial=0) < 0 or cells.max(initial=-1) >= len(vertices):
        raise InvalidParameter("cell vertex index out of range")

    cells = cells.copy()
    pts = vertices[cells]
    edges = pts[:, 1:, :] - pts[:, :1, :]
    signed = np.linalg.det(edges) / math.factorial(d)
    flip = signed < 0
    cells[flip, -2], cells[flip, -1] = cells[flip, -1].copy(), cells[flip, -2].copy()

    pts = vertices[cells]
    edges = pts[:, 1:, :] - pts[:, :1, :]
    volumes = np.linalg.det(edges) / math.factorial(d)
    diams = np.zeros(len(cells))
    for a, b in combinations(range(d + 1), 2):
        diams = np.maximum(diams, np.linalg.norm(pts[:, a] - pts[:, b], axis=1))
    if np.any(volumes < 1e-14 * diams ** d):
        bad = int(np.argmin(volumes / diams ** d))
        raise DegenerateSimplex(f"cell {bad} is degenerate")

    incidence: dict[tuple, list[tuple[int, int]]] = {}
    for j in range(len(cells)):
        cell = cells[j]
        for i in range(d + 1):
            key = tuple(sorted(np.delete(cell, i)))
            incidence.setdefault(key, []).append((j, i))

    keys = sorted(incidence)
    nf = len(keys)
    face_vertices = np.array(keys, dtype=np.int64)
    face_cells = np.full((nf, 2), -1, dtype=np.int64)
    face_local = np.full((nf, 2), -1, dtype=np.int64)
    for f, key in enumerate(keys):
        sides = incidence[key]
        if len(sides) > 2:
            raise NonConformal(f"face {key} shared by {len(sides)} cells")
        sides.sort()
        for s, (j, i) in enumerate(sides):
            face_cells[f, s] = j
            face_local[f, s] = i

    boundary = face_cells[:, 1] < 0
    _check_closed_boundary(face_vertices[boundary], d)

    cell_faces = np.full((len(cells), d + 1), -1, dtype=np.int64)
    for f in range(nf):
        for s in range(2):
            if face_cells[f, s] >= 0:
                cell_faces[face_cells[f, s], face_local[f, s]] = f

    # barycentric gradients: rows 1..d of inv(edge matrix)^T, row 0 closes the sum
    inv_edges = np.linalg.inv(edges)
    grad = np.empty((len(cells), d + 1, d))
    grad[:, 1:, :] = np.swapaxes(inv_edges, 1, 2)
    grad[:, 0, :] = -grad[:, 1:, :].sum(axis=1)

    fpts = vertices[face_vertices]
    if d == 2:
        evec = fpts[:, 1] - fpts[:, 0]
        face_measures = np.linalg.norm(evec, axis=1)
        normals = np.column_stack([evec[:, 1], -evec[:, 0]]) / face_measures[:, None]
    else:
        cr = np.cross(fpts[:, 1] - fpts[:, 0], fpts[:, 2] - fpts[:, 0])
        nrm = np.linalg.norm(cr, axis=1)
        face_measures = 0.5 * nrm
        normals = cr / nrm[:, None]
    owner = face_cells[:, 0]
    opp = vertices[cells[owner, face_local[:, 0]]]
    inward = np.einsum("fd,fd->f", normals, opp - fpts[:, 0]) > 0
    normals[inward] *= -1.0

    face_ell = np.full((nf, 2), np.nan)
    for s in range(2):
        have = face_cells[:, s] >= 0
        face_ell[have, s] = (math.factorial(d) * volumes[face_cells[have, s]]
                             / face_measures[have])

    return Mesh(d, vertices, cells, face_vertices, face_cells, face_local,
                cell_faces, volumes, diams, grad, face_measures, normals, face_ell)


def _check_closed_boundary(boundary_faces: np.ndarray, d: int) -> None:
    """Each (d-2)-subface of the boundary must appear exactly twice."""
    counts: dict[tuple, int] = {}
    for face in boundary_faces:
        for sub in combinations(sorted(face), d - 1):
            counts[sub] = counts.get(sub, 0) + 1
    for sub, c in counts.items():
        if c != 2:
            raise NonConformal(
                f"boundary is not closed near {sub} (count {c}); hanging node?")


def generate_square(n_x: int, n_y: int, pattern: str = "diagonal") -> Mesh:
    """Triangulate [0,1]^2 on an n_x x n_y grid.

    ``diagonal`` splits each grid rectangle into two right triangles along
    the same diagonal (maximum angle exactly pi/2); ``crisscross`` splits
    each rectangle into four triangles through its center.  Anisotropy
    comes from n_x != n_y.
    """
    x = np.linspace(0.0, 1.0, n_x + 1)
    y = np.linspace(0.0, 1.0, n_y + 1)
    return _square_from_lines(x, y, pattern)


def generate_square_graded(n_x: int, n_y: int, exponent: float = 2.0,
                           pattern: str = "diagonal") -> Mesh:
    """Unit-square family with power-law grading of the y-lines towards y=0.

    Cells remain axis-aligned right triangles, so the maximum angle stays
    pi/2 no matter how strong the grading; useful for boundary layers.
    """
    if exponent <= 0:
        raise InvalidParameter("grading exponent must be positive")
    x = np.linspace(0.0, 1.0, n_x + 1)
    y = (np.arange(n_y + 1) / n_y) ** float(exponent)
    return _square_from_lines(x, y, pattern)


def _square_from_lines(x: np.ndarray, y: np.ndarray, pattern: str) -> Mesh:
    n_x, n_y = len(x) - 1, len(y) - 1
    if n_x < 1 or n_y < 1:
        raise InvalidParameter("grid counts must be >= 1")
    if pattern not in ("diagonal", "crisscross"):
        raise InvalidParameter(f"unknown pattern {pattern!r}")

    xv, yv = np.meshgrid(x, y, indexing="ij")
    verts = np.column_stack([xv.ravel(), yv.ravel()])
    vid = lambda i, j: i * (n_y + 1) + j

    cells = []
    if pattern == "diagonal":
        for i in range(n_x):
            for j in range(n_y):
                ll, lr = vid(i, j), vid(i + 1, j)
                ul, ur = vid(i, j + 1), vid(i + 1, j + 1)
                cells.append((ll, lr, ur))
                cells.append((ll, ur, ul))
    else:
        centers = []
        base = len(verts)
        for i in range(n_x):
            for j in range(n_y):
                cx = 0.5 * (x[i] + x[i + 1])
                cy = 0.5 * (y[j] + y[j + 1])
                centers.append((cx, cy))
                c = base + i * n_y + j
                ll, lr = vid(i, j), vid(i + 1, j)
                ul, ur = vid(i, j + 1), vid(i + 1, j + 1)
                cells.extend([(ll, lr, c), (lr, ur, c), (ur, ul, c), (ul, ll, c)])
        verts = np.vstack([verts, np.array(centers)])
    return build_connectivity(verts, np.array(cells, dtype=np.int64))


def generate_cube(n_x: int, n_y: int, n_z: int) -> Mesh:
    """Tetrahedralize [0,1]^3 by splitting each grid box into six tetrahedra.

    Every box is cut along vertex-ordered lattice paths from its lowest to
    its highest corner (one tetrahedron per axis permutation), which keeps
    neighbouring boxes conformal.
    """
    if min(n_x, n_y, n_z) < 1:
        raise InvalidParameter("grid counts must be >= 1")
    counts = (n_x, n_y, n_z)
    lines = [np.linspace(0.0, 1.0, n + 1) for n in counts]
    grid = np.meshgrid(*lines, indexing="ij")
    verts = np.column_stack([g.ravel() for g in grid])

    def vid(i, j, k):
        return (i * (n_y + 1) + j) * (n_z + 1) + k

    unit = np.eye(3, dtype=np.int64)
    cells = []
    for i in range(n_x):
        for j in range(n_y):
            for k in range(n_z):
                corner = np.array([i, j, k], dtype=np.int64)
                for perm in sorted(permutations(range(3))):
                    steps = [corner,
                             corner + unit[perm[0]],
                             corner + unit[perm[0]] + unit[perm[1]],
                             corner + 1]
                    cells.append(tuple(vid(*s) for s in steps))
    return build_connectivity(verts, np.array(cells, dtype=np.int64))


def cell_quality(mesh: Mesh):
    """Per-cell H_T/h_T, shape type tag, maximum angle and aspect ratio h_1/h_d.

    Angles are vertex angles in 2D and dihedral angles in 3D.
    Returns four arrays of length n_cells.
    """
    ne = mesh.n_cells
    h_over_h = np.empty(ne)
    shape_type = np.empty(ne, dtype=np.int64)
    max_angle = np.empty(ne)
    aspect = np.empty(ne)
    for j in range(ne):
        chi = characterize(mesh.cell_simplex(j), vertex_ids=mesh.cells[j])
        h_over_h[j] = chi.H_over_h
        shape_type[j] = chi.shape_type
        max_angle[j] = _max_angle(mesh, j)
        aspect[j] = chi.h[0] / chi.h[-1]
    return h_over_h, shape_type, max_angle, aspect


def _max_angle(mesh: Mesh, j: int) -> float:
    d = mesh.dim
    if d == 2:
        pts = mesh.vertices[mesh.cells[j]]
        worst = 0.0
        for k in range(3):
            u = pts[(k + 1) % 3] - pts[k]
            v = pts[(k + 2) % 3] - pts[k]
            c = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
            worst = max(worst, math.acos(max(-1.0, min(1.0, c))))
        return worst
    # dihedral angles from outward face normals: cos(theta) = -n_i . n_j
    grads = mesh.grad_lambda[j]
    normals = -grads / np.linalg.norm(grads, axis=1)[:, None]
    worst = 0.0
    for a, b in combinations(range(4), 2):
        c = -float(np.dot(normals[a], normals[b]))
        worst = max(worst, math.acos(max(-1.0, min(1.0, c))))
    return worst


def stats(mesh: Mesh) -> MeshStats:
    """Mesh-quality summary: h, max angle, gamma0 = max H_T/h_T, aspect."""
    h_over_h, _, max_angle, aspect = cell_quality(mesh)
    worst_angle = float(max_angle.max())
    return MeshStats(
        h=mesh.h,
        min_h=float(mesh.cell_diameters.min()),
        max_angle=worst_angle,
        gamma0=float(h_over_h.max()),
        max_aspect=float(aspect.max()),
        cell_count=mesh.n_cells,
        face_count=mesh.n_faces,
        boundary_face_count=int(len(mesh.boundary_faces)),
    )


def write_vtk(path, mesh: Mesh, cell_data: dict | None = None,
              title: str = "wopsip mesh") -> None:
    """Write a legacy ASCII VTK unstructured grid with optional per-cell scalars."""
    lines = ["# vtk DataFile Version 3.0", title, "ASCII",
             "DATASET UNSTRUCTURED_GRID"]
    nv = len(mesh.vertices)
    lines.append(f"POINTS {nv} double")
    for p in mesh.vertices:
        xyz = list(map(repr, p)) + ["0.0"] * (3 - mesh.dim)
        lines.append(" ".join(xyz))
    ne = mesh.n_cells
    lines.append(f"CELLS {ne} {ne * (mesh.dim + 2)}")
    for cell in mesh.cells:
        lines.append(" ".join([str(mesh.dim + 1)] + [str(int(v)) for v in cell]))
    lines.append(f"CELL_TYPES {ne}")
    ctype = VTK_TRIANGLE if mesh.dim == 2 else VTK_TETRA
    lines.extend([str(ctype)] * ne)
    if cell_data:
        lines.append(f"CELL_DATA {ne}")
        for name, values in cell_data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(repr(float(v)) for v in values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_mesh(path, mesh: Mesh) -> None:
    """Minimal ASCII mesh format: dim, vertex count + lines, cell count + lines."""
    with open(path, "w") as fh:
        fh.write(f"dim {mesh.dim}\n")
        fh.write(f"vertices {len(mesh.vertices)}\n")
        for p in mesh.vertices:
            fh.write(" ".join(map(repr, p)) + "\n")
        fh.write(f"cells {mesh.n_cells}\n")
        for cell in mesh.cells:
            fh.write(" ".join(str(int(v)) for v in cell) + "\n")


def read_mesh(path) -> Mesh:
    """Read the minimal ASCII format written by ``write_mesh``."""
    with open(path) as fh:
        tokens = fh.read().split()
    pos = 0

    def expect(word):
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != word:
            raise InvalidParameter(f"malformed mesh file: expected {word!r}")
        pos += 1
        value = int(tokens[pos])
        pos += 1
        return value

    d = expect("dim")
    if d not in (2, 3):
        raise InvalidParameter("mesh file dimension must be 2 or 3")
    nv = expect("vertices")
    verts = np.array(tokens[pos:pos + nv * d], dtype=float).reshape(nv, d)
    pos += nv * d
    ne = expect("cells")
    cells = np.array(tokens[pos:pos + ne * (d + 1)], dtype=np.int64).reshape(ne, d + 1)
    return build_connectivity(verts, cells)
