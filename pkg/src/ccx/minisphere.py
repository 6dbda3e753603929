"""Minimal bounding spheres of finite point sets.

Welzl's move-to-front recursion gives the exact smallest enclosing ball;
the helpers certify it against Jung's diameter bound and check that the
centre lies in the convex hull of the contact points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial.distance import pdist

__all__ = [
    "Polytope",
    "Sphere",
    "JungReport",
    "min_bounding_sphere",
    "circumsphere",
    "jung_check",
    "centre_in_hull_check",
    "MAX_DIM",
]

MAX_DIM = 10
SOLVER_TOL = 1e-9
CONTACT_TOL = 1e-7


@dataclass(frozen=True)
class Polytope:
    """Convex hull of a finite vertex list (vertices need not be extreme points)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float, copy=True)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.ndim != 2 or v.shape[0] == 0:
            raise ValueError("a polytope needs a non-empty (k, d) vertex array")
        if not np.all(np.isfinite(v)):
            raise ValueError("polytope vertices must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def unique(self, decimals: int = 12) -> "Polytope":
        _, idx = np.unique(np.round(self.vertices, decimals), axis=0, return_index=True)
        return Polytope(self.vertices[np.sort(idx)])


@dataclass(frozen=True)
class Sphere:
    centre: np.ndarray
    radius: float
    support: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.array(self.centre, dtype=float))
        c.setflags(write=False)
        object.__setattr__(self, "centre", c)
        if not self.radius >= 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, p, tol: float = SOLVER_TOL) -> bool:
        return bool(np.linalg.norm(np.asarray(p, dtype=float) - self.centre) <= self.radius + tol)


def _as_points(points) -> np.ndarray:
    if isinstance(points, Polytope):
        return points.vertices
    arr = np.asarray(points, dtype=float)
    return arr.reshape(-1, 1) if arr.ndim == 1 else arr


def circumsphere(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Smallest sphere through all of ``points``: centre in their affine hull.

    Coincident points are merged first; affinely dependent sets fall back to a
    least-squares solve.
    """
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    p0 = pts[0]
    if len(pts) == 1:
        return p0.copy(), 0.0
    A = pts[1:] - p0
    gram = A @ A.T
    rhs = 0.5 * np.diag(gram)
    coef = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    centre = p0 + coef @ A
    radius = float(np.max(np.linalg.norm(pts - centre, axis=1)))
    return centre, radius


def _inside(centre, radius, p) -> bool:
    d = np.linalg.norm(p - centre)
    return d <= radius * (1.0 + 1e-12) + 1e-13


def _mtf(pts: list, end: int, support: list, dim: int):
    centre, radius = circumsphere(np.array(support)) if support else (None, -1.0)
    if len(support) == dim + 1:
        return centre, radius, support
    best_support = support
    i = 0
    while i < end:
        p = pts[i]
        if centre is None or not _inside(centre, radius, p):
            centre, radius, best_support = _mtf(pts, i, support + [p], dim)
            pts.insert(0, pts.pop(i))
        i += 1
    return centre, radius, best_support


def min_bounding_sphere(points, seed: int = 0) -> Sphere:
    """Exact minimal enclosing ball of a finite point set (``d <= 10``).

    Points are shuffled with a fixed ``seed`` for expected linear time, so
    the result is deterministic.
    """
    verts = _as_points(points)
    if verts.size == 0 or verts.shape[0] == 0:
        raise ValueError("min_bounding_sphere needs at least one point")
    dim = verts.shape[1]
    if dim > MAX_DIM:
        raise ValueError(f"dimension {dim} exceeds the supported maximum {MAX_DIM}")
    uniq = np.unique(verts, axis=0)
    order = np.random.default_rng(seed).permutation(len(uniq))
    pts = [uniq[i] for i in order]
    centre, radius, support = _mtf(pts, len(pts), [], dim)
    # the circumsphere of the support is exact; re-measure against all points
    radius = max(radius, float(np.max(np.linalg.norm(verts - centre, axis=1))))
    return Sphere(centre, radius, np.array(support))


@dataclass(frozen=True)
class JungReport:
    radius: float
    diameter: float
    bound: float
    slack: float
    ok: bool


def jung_check(points) -> JungReport:
    """Check ``r <= sqrt(n / (2 (n + 1))) * diam`` in the ambient dimension ``n``."""
    verts = _as_points(points)
    if verts.shape[0] < 2:
        raise ValueError("jung_check needs at least two points")
    n = verts.shape[1]
    diameter = float(np.max(pdist(verts)))
    radius = min_bounding_sphere(verts).radius
    bound = math.sqrt(n / (2.0 * (n + 1))) * diameter
    slack = bound - radius
    return JungReport(radius, diameter, bound, slack, bool(slack >= -SOLVER_TOL))


def centre_in_hull_check(points, s: Sphere, return_residual: bool = False):
    """True iff the centre of ``s`` lies in the hull of the points on its boundary.

    Contact points are those within ``1e-7`` of the radius; the hull distance
    is found with a small linear programme over the simplex.
    """
    verts = _as_points(points)
    ref = min_bounding_sphere(verts)
    if abs(ref.radius - s.radius) > 1e-9 * max(1.0, ref.radius) or \
            np.linalg.norm(ref.centre - s.centre) > 1e-7 * max(1.0, ref.radius):
        raise ValueError("sphere is not the minimal bounding sphere of the points")
    dist = np.linalg.norm(verts - s.centre, axis=1)
    contacts = verts[np.abs(dist - s.radius) <= CONTACT_TOL]
    k, d = contacts.shape
    # variables: mu (k), t; minimise t with |contacts^T mu - c|_inf <= t, mu in simplex
    c_obj = np.zeros(k + 1)
    c_obj[-1] = 1.0
    P = contacts.T
    A_ub = np.block([[P, -np.ones((d, 1))], [-P, -np.ones((d, 1))]])
    b_ub = np.concatenate([s.centre, -s.centre])
    A_eq = np.concatenate([np.ones(k), [0.0]])[None, :]
    res = linprog(c_obj, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * k + [(0, None)], method="highs")
    if res.status != 0:
        residual = math.inf
    else:
        mu = res.x[:k]
        residual = float(np.linalg.norm(P @ mu - s.centre))
    ok = residual <= CONTACT_TOL
    return (ok, residual) if return_residual else ok
