"""Quadrature rules on reference simplices (segment, triangle, tetrahedron).

Rules are conical products of Gauss-Legendre / Gauss-Jacobi lines, which
guarantees positive weights and exactness for all polynomials up to the
requested total degree.  Points are stored as barycentric coordinates and
weights are normalized to sum to one, so ``integrate`` is simply
``|T| * sum(w_q f(x_q))`` for any target simplex with measure |T|.

Rules are immutable constants (built once per (dimension, degree) pair)
and ``integrate`` is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import DimensionMismatch, UnsupportedDegree
from .geometry import Simplex

#: Highest supported polynomial exactness request.
MAX_DEGREE = 6

#: Default degrees used by assembly and error norms.
DEFAULT_VOLUME_DEGREE = 4
DEFAULT_FACE_DEGREE = 4


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points, weights summing to one, and guaranteed exactness."""

    points: np.ndarray     # (n, dim+1) barycentric coordinates
    weights: np.ndarray    # (n,), positive, sum 1
    exact_degree: int

    @property
    def dim(self) -> int:
        return self.points.shape[1] - 1

    def __len__(self) -> int:
        return self.points.shape[0]


def _jacobi_01(n: int, alpha: int):
    """Gauss-Jacobi nodes/weights on [0,1] for the weight (1-t)^alpha."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (x + 1.0), w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def simplex_rule(d: int, degree: int) -> QuadratureRule:
    """Rule on the reference d-simplex exact for total degree <= degree.

    Parameters
    ----------
    d : int
        Simplex dimension, 1, 2 or 3.
    degree : int
        Target polynomial exactness, 0 <= degree <= 6.
    """
    if d not in (1, 2, 3) or not (0 <= degree <= MAX_DEGREE):
        raise UnsupportedDegree(f"no rule for d={d}, degree={degree}")
    n = degree // 2 + 1
    exact = 2 * n - 1

    # direction k carries the Jacobian factor (1-t_k)^k of the collapse map
    lines = [_jacobi_01(n, alpha) for alpha in range(d)]
    grids = np.meshgrid(*[t for t, _ in lines], indexing="ij")
    wgrids = np.meshgrid(*[w for _, w in lines], indexing="ij")
    coords = []
    remaining = 1.0
    # build cartesian coordinates x_k = t_k * prod_{m>k} (1 - t_m)
    for k in range(d):
        shrink = np.ones_like(grids[0])
        for m in range(k + 1, d):
            shrink = shrink * (1.0 - grids[m])
        coords.append(grids[k] * shrink)
    cart = np.stack([c.ravel() for c in coords], axis=1)
    weights = np.ones(cart.shape[0])
    for wg in wgrids:
        weights = weights * wg.ravel()
    weights = weights / (1.0 / math.factorial(d))

    bary = np.column_stack([1.0 - cart.sum(axis=1), cart])
    return QuadratureRule(bary, weights, exact)


def _vertices_of(domain) -> np.ndarray:
    if isinstance(domain, Simplex):
        return domain.vertices
    return np.asarray(domain, dtype=float)


def embedded_measure(vertices: np.ndarray) -> float:
    """k-volume of a k-simplex given by (k+1) points in R^m, m >= k."""
    e = vertices[1:] - vertices[0]
    gram = e @ e.T
    k = e.shape[0]
    return math.sqrt(max(float(np.linalg.det(gram)), 0.0)) / math.factorial(k)


def integrate(rule: QuadratureRule, simplex, f) -> float:
    """|T| * sum_q w_q f(x_q) over a simplex (or raw vertex array).

    ``f`` must accept an (n, m) array of points and return n values.
    A face of a 3D cell is integrated by passing its 3 vertices with the
    matching 2D rule; the embedded measure is used automatically.
    """
    vertices = _vertices_of(simplex)
    if vertices.shape[0] != rule.dim + 1:
        raise DimensionMismatch(
            f"rule is {rule.dim}-dimensional, domain has {vertices.shape[0]} vertices")
    pts = rule.points @ vertices
    vals = np.asarray(f(pts), dtype=float)
    return embedded_measure(vertices) * float(np.dot(rule.weights, vals))
