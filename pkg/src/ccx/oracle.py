"""Closed-form test functions with exact values and (sub/super)differentials.

Every function here is piecewise smooth with an explicitly computable active
set, so the set of slopes at a point is a polytope given by its vertices.
These are the ground truth for the limit checks in :mod:`ccx.singularity`
and :mod:`ccx.medial`.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, ScalarGrid
from .minisphere import Polytope, min_bounding_sphere

__all__ = [
    "OracleError",
    "TestFunction",
    "random_sublinear",
    "Abs",
    "Relu",
    "Sublinear",
    "DistToPoints",
    "SqDistToPoints",
    "WeightedSqDist",
    "Square",
    "Affine",
    "Sum",
    "Scale",
    "Translate",
    "DCPair",
    "SubdifferentialResult",
    "Landscape",
    "sample",
    "subdifferential",
    "predicted_landscape",
    "medial_limit_formula",
    "project_onto_hull",
    "from_json",
    "parse_function",
]

ACTIVE_TOL = 1e-9


class OracleError(ValueError):
    """Raised when a closed-form quantity is undefined or not tractable."""


@dataclass(frozen=True)
class SubdifferentialResult:
    """Vertices of ``∂₋f(x)`` (``sign='sub'``) or ``∂₊f(x)`` (``sign='super'``)."""

    polytope: Polytope
    sign: str

    @property
    def singular(self) -> bool:
        v = self.polytope.vertices
        return bool(len(v) > 1 and np.ptp(v, axis=0).max() > ACTIVE_TOL)

    def support(self, direction) -> float:
        """Directional derivative predicted by the polytope: max (sub) or min (super) of ``p . d``."""
        vals = self.polytope.vertices @ np.atleast_1d(np.asarray(direction, dtype=float))
        return float(vals.max() if self.sign == "sub" else vals.min())


def _point(x, dim: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dim,):
        raise OracleError(f"expected a point with {dim} coordinates, got shape {x.shape}")
    return x


def _coords(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != dim:
        raise OracleError(f"expected coordinates with trailing size {dim}, got {x.shape}")
    return x


class TestFunction:
    """Base class: call with an ``(..., dim)`` array to evaluate."""

    __test__ = False  # keep pytest from collecting this class

    dim: int = 1
    lambda0: float | None = 0.0
    convexity: str = "convex"

    def __call__(self, x) -> np.ndarray:
        return self._eval(_coords(x, self.dim))

    def _eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def subdifferential(self, x) -> SubdifferentialResult:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    @property
    def is_convex(self) -> bool:
        return self.convexity == "convex"

    def __add__(self, other: "TestFunction") -> "Sum":
        return Sum([self, other])

    def __sub__(self, other: "TestFunction") -> "Sum":
        return Sum([self, Scale(-1.0, other)])

    def __neg__(self) -> "Scale":
        return Scale(-1.0, self)

    def __repr__(self):
        return f"{type(self).__name__}({json.dumps(self.to_json())})"


def _single(p, sign: str = "sub") -> SubdifferentialResult:
    return SubdifferentialResult(Polytope(np.atleast_2d(p)), sign)


class Abs(TestFunction):
    """``|x|`` on the real line."""

    def _eval(self, x):
        return np.abs(x[..., 0])

    def subdifferential(self, x):
        x = _point(x, 1)[0]
        if abs(x) <= ACTIVE_TOL:
            return SubdifferentialResult(Polytope([[-1.0], [1.0]]), "sub")
        return _single([np.sign(x)])

    def to_json(self):
        return {"type": "abs"}


class Relu(TestFunction):
    """``max(x, 0)`` on the real line."""

    def _eval(self, x):
        return np.maximum(x[..., 0], 0.0)

    def subdifferential(self, x):
        x = _point(x, 1)[0]
        if abs(x) <= ACTIVE_TOL:
            return SubdifferentialResult(Polytope([[0.0], [1.0]]), "sub")
        return _single([1.0 if x > 0 else 0.0])

    def to_json(self):
        return {"type": "relu"}


class Sublinear(TestFunction):
    """Support function ``σ_S(x) = max{p . x : p in S}`` of a polytope ``S``."""

    def __init__(self, S):
        self.S = S if isinstance(S, Polytope) else Polytope(S)
        self.dim = self.S.dim

    def _eval(self, x):
        return np.max(x @ self.S.vertices.T, axis=-1)

    def subdifferential(self, x):
        x = _point(x, self.dim)
        vals = self.S.vertices @ x
        active = vals >= vals.max() - ACTIVE_TOL
        return SubdifferentialResult(Polytope(self.S.vertices[active]).unique(), "sub")

    def to_json(self):
        return {"type": "sublinear", "S": self.S.vertices.tolist()}


class _PointSet(TestFunction):
    def __init__(self, K):
        self.K = K if isinstance(K, Polytope) else Polytope(K)
        self.dim = self.K.dim

    def _sq(self, x):
        # (..., m) squared distances to every site
        diff = x[..., None, :] - self.K.vertices
        return np.einsum("...ij,...ij->...i", diff, diff)

    def nearest(self, x) -> np.ndarray:
        """``K(x)``: the sites at minimal distance (squared distances within 1e-9)."""
        x = _point(x, self.dim)
        d2 = self._sq(x)
        return self.K.vertices[d2 <= d2.min() + ACTIVE_TOL]


class SqDistToPoints(_PointSet):
    """``dist²(x, K)`` for a finite set ``K``; semiconcave with ``λ₀ = 1``."""

    lambda0 = 1.0
    convexity = "semiconcave-linear"

    def _eval(self, x):
        return self._sq(x).min(axis=-1)

    def subdifferential(self, x):
        x = _point(x, self.dim)
        return SubdifferentialResult(Polytope(2.0 * (x - self.nearest(x))).unique(), "super")

    def to_json(self):
        return {"type": "sq_dist_to_points", "K": self.K.vertices.tolist()}


class DistToPoints(_PointSet):
    """``dist(x, K)``; locally semiconcave away from ``K``."""

    lambda0 = None
    convexity = "semiconcave-linear"

    def _eval(self, x):
        return np.sqrt(self._sq(x).min(axis=-1))

    def subdifferential(self, x):
        x = _point(x, self.dim)
        near = self.nearest(x)
        d = np.linalg.norm(x - near[0])
        if d <= ACTIVE_TOL:
            raise OracleError("the superdifferential of dist(., K) is not available at points of K")
        return SubdifferentialResult(Polytope((x - near) / d).unique(), "super")

    def to_json(self):
        return {"type": "dist_to_points", "K": self.K.vertices.tolist()}


class WeightedSqDist(_PointSet):
    """``min_i w_i |x - k_i|² + b_i`` with ``w_i > 0``."""

    convexity = "semiconcave-linear"

    def __init__(self, K, weights, offsets=None):
        super().__init__(K)
        m = len(self.K)
        self.weights = np.broadcast_to(np.asarray(weights, dtype=float), (m,)).copy()
        self.offsets = np.zeros(m) if offsets is None else np.broadcast_to(
            np.asarray(offsets, dtype=float), (m,)).copy()
        if np.any(self.weights <= 0):
            raise OracleError("weights must be positive")
        self.lambda0 = float(self.weights.max())

    def _terms(self, x):
        return self.weights * self._sq(x) + self.offsets

    def _eval(self, x):
        return self._terms(x).min(axis=-1)

    def subdifferential(self, x):
        x = _point(x, self.dim)
        t = self._terms(x)
        active = t <= t.min() + ACTIVE_TOL
        grads = 2.0 * self.weights[active, None] * (x - self.K.vertices[active])
        return SubdifferentialResult(Polytope(grads).unique(), "super")

    def to_json(self):
        return {"type": "weighted_sq_dist", "K": self.K.vertices.tolist(),
                "weights": self.weights.tolist(), "offsets": self.offsets.tolist()}


class Square(TestFunction):
    """``c |x|²`` (smooth)."""

    convexity = "smooth"

    def __init__(self, dim: int = 1, coeff: float = 1.0):
        self.dim = int(dim)
        self.coeff = float(coeff)
        self.lambda0 = max(-self.coeff, 0.0)

    @property
    def is_convex(self):
        return self.coeff >= 0

    def _eval(self, x):
        return self.coeff * np.sum(x * x, axis=-1)

    def subdifferential(self, x):
        return _single(2.0 * self.coeff * _point(x, self.dim))

    def to_json(self):
        return {"type": "square", "dim": self.dim, "coeff": self.coeff}


class Affine(TestFunction):
    """``a . x + b``."""

    convexity = "smooth"

    def __init__(self, a, b: float = 0.0):
        self.a = np.atleast_1d(np.asarray(a, dtype=float))
        self.b = float(b)
        self.dim = self.a.size

    @property
    def is_convex(self):
        return True

    def _eval(self, x):
        return x @ self.a + self.b

    def subdifferential(self, x):
        _point(x, self.dim)
        return _single(self.a)

    def to_json(self):
        return {"type": "affine", "a": self.a.tolist(), "b": self.b}


def _minkowski(parts: list[np.ndarray]) -> np.ndarray:
    out = parts[0]
    for p in parts[1:]:
        out = (out[:, None, :] + p[None, :, :]).reshape(-1, out.shape[1])
    return out


class Sum(TestFunction):
    """Pointwise sum; differentials add when all singular terms share a sign."""

    def __init__(self, terms):
        self.terms = list(terms)
        if not self.terms:
            raise OracleError("empty sum")
        dims = {t.dim for t in self.terms}
        if len(dims) != 1:
            raise OracleError(f"terms have differing dimensions {dims}")
        self.dim = dims.pop()
        flags = {t.convexity for t in self.terms}
        if all(t.is_convex for t in self.terms):
            self.convexity = "convex"
        elif flags == {"smooth"}:
            self.convexity = "smooth"
        else:
            self.convexity = "dc"
        l0 = [t.lambda0 for t in self.terms]
        self.lambda0 = None if any(v is None for v in l0) else float(sum(l0))

    @property
    def is_convex(self):
        return all(t.is_convex for t in self.terms)

    def _eval(self, x):
        return sum(t._eval(x) for t in self.terms)

    def subdifferential(self, x):
        results = [t.subdifferential(x) for t in self.terms]
        signs = {r.sign for r in results if r.singular}
        if len(signs) > 1:
            raise OracleError("sum mixes singular sub- and superdifferentials; no closed form")
        sign = signs.pop() if signs else "sub"
        verts = _minkowski([np.asarray(r.polytope.vertices) for r in results])
        return SubdifferentialResult(Polytope(verts).unique(), sign)

    def to_json(self):
        return {"type": "sum", "terms": [t.to_json() for t in self.terms]}


class Scale(TestFunction):
    """``c * f``; a negative factor swaps sub- and superdifferentials."""

    def __init__(self, c: float, f: TestFunction):
        self.c = float(c)
        self.f = f
        self.dim = f.dim
        flip = {"convex": "concave", "concave": "convex",
                "semiconvex-linear": "semiconcave-linear", "semiconcave-linear": "semiconvex-linear"}
        if self.c >= 0:
            self.convexity = f.convexity
        else:
            self.convexity = flip.get(f.convexity, f.convexity)
        self.lambda0 = None if f.lambda0 is None else abs(self.c) * f.lambda0

    @property
    def is_convex(self):
        return self.c == 0 or (self.c > 0 and self.f.is_convex)

    def _eval(self, x):
        return self.c * self.f._eval(x)

    def subdifferential(self, x):
        r = self.f.subdifferential(x)
        sign = r.sign if self.c >= 0 else {"sub": "super", "super": "sub"}[r.sign]
        return SubdifferentialResult(Polytope(self.c * r.polytope.vertices), sign)

    def to_json(self):
        return {"type": "scale", "c": self.c, "f": self.f.to_json()}


class Translate(TestFunction):
    """``f(x - shift)``."""

    def __init__(self, f: TestFunction, shift):
        self.f = f
        self.shift = _point(shift, f.dim)
        self.dim = f.dim
        self.convexity = f.convexity
        self.lambda0 = f.lambda0

    @property
    def is_convex(self):
        return self.f.is_convex

    def _eval(self, x):
        return self.f._eval(x - self.shift)

    def subdifferential(self, x):
        return self.f.subdifferential(_point(x, self.dim) - self.shift)

    def to_json(self):
        return {"type": "translate", "shift": self.shift.tolist(), "f": self.f.to_json()}


class DCPair(Sum):
    """``g - h`` for convex ``g`` and ``h``."""

    def __init__(self, g: TestFunction, h: TestFunction):
        if not (g.is_convex and h.is_convex):
            raise OracleError("both components of a DC pair must be convex")
        self.g = g
        self.h = h
        super().__init__([g, Scale(-1.0, h)])
        if not (g.convexity == "smooth" and h.convexity == "smooth"):
            self.convexity = "dc"

    def to_json(self):
        return {"type": "dc_pair", "g": self.g.to_json(), "h": self.h.to_json()}


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def sample(tf: TestFunction, spec: GridSpec) -> ScalarGrid:
    """Exact values of ``tf`` at the nodes of ``spec``."""
    if spec.ndim != tf.dim:
        raise OracleError(f"grid has {spec.ndim} axes but the function is {tf.dim}-dimensional")
    return ScalarGrid(tf(spec.node_coords()), spec.origin, spec.spacing)


def random_sublinear(rng: np.random.Generator, dim: int = 1, max_vertices: int = 4,
                     scale: float = 1.0) -> Sublinear:
    """Support function of 2 to ``max_vertices`` random slopes drawn from ``[-scale, scale]^dim``."""
    if dim < 1 or max_vertices < 2:
        raise OracleError("random_sublinear needs dim >= 1 and max_vertices >= 2")
    k = int(rng.integers(2, max_vertices + 1))
    return Sublinear(rng.uniform(-scale, scale, size=(k, dim)))


def subdifferential(tf: TestFunction, x) -> SubdifferentialResult:
    return tf.subdifferential(x)


@dataclass(frozen=True)
class Landscape:
    """Minimal bounding sphere of the differential and the predicted scale-1 limit ``r²/4``."""

    centre: np.ndarray
    radius: float
    limit: float
    sign: str


def predicted_landscape(tf: TestFunction, x) -> Landscape:
    r = tf.subdifferential(x)
    s = min_bounding_sphere(r.polytope)
    return Landscape(s.centre, s.radius, s.radius ** 2 / 4.0, r.sign)


def project_onto_hull(points, x) -> np.ndarray:
    """Euclidean projection of ``x`` onto the convex hull of ``points``.

    Exhaustive over faces spanned by at most ``d + 1`` points, which is exact
    and cheap for the handful of nearest sites this is used with.
    """
    P = points.vertices if isinstance(points, Polytope) else np.atleast_2d(np.asarray(points, dtype=float))
    x = np.asarray(x, dtype=float)
    P = np.unique(P, axis=0)
    best, best_d = P[0], np.inf
    for k in range(1, min(len(P), P.shape[1] + 1) + 1):
        for idx in itertools.combinations(range(len(P)), k):
            Q = P[list(idx)]
            if k == 1:
                cand = Q[0]
            else:
                A = (Q[1:] - Q[0]).T
                coef = np.linalg.lstsq(A, x - Q[0], rcond=None)[0]
                bary = np.concatenate([[1.0 - coef.sum()], coef])
                if np.any(bary < -1e-12):
                    continue
                cand = Q[0] + A @ coef
            d = float(np.sum((cand - x) ** 2))
            if d < best_d:
                best, best_d = cand, d
    return best


def medial_limit_formula(K, x) -> float:
    """``dist²(x, K) - dist²(x, co[K(x)])`` for a finite set ``K``."""
    sq = SqDistToPoints(K)
    x = _point(x, sq.dim)
    near = sq.nearest(x)
    d2 = float(sq(x))
    p = project_onto_hull(near, x)
    return d2 - float(np.sum((x - p) ** 2))


# ---------------------------------------------------------------------------
# JSON specs
# ---------------------------------------------------------------------------

def from_json(obj) -> TestFunction:
    """Build a test function from a JSON-like dict, e.g. ``{"type": "sublinear", "S": [[1, 0], [-1, 0]]}``."""
    if isinstance(obj, str):
        obj = json.loads(obj) if obj.lstrip().startswith("{") else {"type": obj}
    if not isinstance(obj, dict) or "type" not in obj:
        raise OracleError(f"test function spec needs a 'type' field: {obj!r}")
    kind = obj["type"]
    try:
        if kind == "abs":
            return Abs()
        if kind == "relu":
            return Relu()
        if kind == "sublinear":
            return Sublinear(obj["S"])
        if kind == "dist_to_points":
            return DistToPoints(obj["K"])
        if kind == "sq_dist_to_points":
            return SqDistToPoints(obj["K"])
        if kind == "weighted_sq_dist":
            return WeightedSqDist(obj["K"], obj.get("weights", 1.0), obj.get("offsets"))
        if kind == "square":
            return Square(obj.get("dim", 1), obj.get("coeff", 1.0))
        if kind == "affine":
            return Affine(obj["a"], obj.get("b", 0.0))
        if kind == "sum":
            return Sum([from_json(t) for t in obj["terms"]])
        if kind == "scale":
            return Scale(obj["c"], from_json(obj["f"]))
        if kind == "translate":
            return Translate(from_json(obj["f"]), obj["shift"])
        if kind == "dc_pair":
            return DCPair(from_json(obj["g"]), from_json(obj["h"]))
    except KeyError as exc:
        raise OracleError(f"test function {kind!r} is missing field {exc}") from exc
    raise OracleError(f"unknown test function type {kind!r}")


def parse_function(name: str, params: str | dict | None = None) -> TestFunction:
    """CLI helper: oracle name plus optional JSON parameters."""
    spec = {} if params is None else (json.loads(params) if isinstance(params, str) else dict(params))
    spec["type"] = name
    return from_json(spec)
