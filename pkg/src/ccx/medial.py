"""Squared distance transforms and the quadratic medial axis map."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .envelope import lower_envelope
from .grid import GridError, GridSpec, ScalarGrid, crop_margin, estimate_lipschitz, locality_radius
from .minisphere import Polytope
from .oracle import DistToPoints, SqDistToPoints, medial_limit_formula
from .singularity import (DEFAULT_REFINE, DEFAULT_RESOLUTION, RESOLUTION_RULE, gradient_field,
                          landscape_sweep, probe_window)
from .transforms import lower_transform

__all__ = [
    "SiteSet",
    "ResolutionWarning",
    "sq_distance_transform",
    "medial_axis_map",
    "medial_scale1_map",
    "extract_medial_axis",
    "ProbeComparison",
    "DistanceCheckReport",
    "distance_vs_sqdistance_check",
]


class ResolutionWarning(UserWarning):
    """The grid does not resolve the ``1 / (2 lam)`` transition zone."""


@dataclass(frozen=True)
class SiteSet:
    """Sites ``K``: either explicit points or a boolean mask on a grid."""

    points: np.ndarray | None = None
    mask: np.ndarray | None = None
    mask_spec: GridSpec | None = None

    def __post_init__(self):
        if (self.points is None) == (self.mask is None):
            raise GridError("a site set needs exactly one of points or mask")
        if self.points is not None:
            pts = Polytope(self.points).vertices
            object.__setattr__(self, "points", pts)
        else:
            mask = np.asarray(self.mask, dtype=bool)
            if self.mask_spec is None:
                raise GridError("a mask site set needs the grid it lives on")
            if mask.shape != self.mask_spec.dims:
                raise GridError(f"mask shape {mask.shape} does not match grid dims {self.mask_spec.dims}")
            if not mask.any():
                raise GridError("site mask is empty")
            object.__setattr__(self, "mask", mask)

    @classmethod
    def from_points(cls, points) -> "SiteSet":
        return cls(points=points)

    @classmethod
    def from_mask(cls, mask, spec: GridSpec) -> "SiteSet":
        return cls(mask=mask, mask_spec=spec)

    @property
    def dim(self) -> int:
        return self.points.shape[1] if self.points is not None else self.mask_spec.ndim

    def coordinates(self) -> np.ndarray:
        if self.points is not None:
            return self.points
        return self.mask_spec.node_coords()[self.mask]


def _mask_offset(sites: SiteSet, spec: GridSpec):
    """Integer offset of ``spec`` relative to the mask lattice, or None if not aligned."""
    ms = sites.mask_spec
    if not np.allclose(ms.spacing, spec.spacing):
        return None
    off = (np.asarray(spec.origin) - np.asarray(ms.origin)) / np.asarray(spec.spacing)
    if np.any(np.abs(off - np.rint(off)) > 1e-6):
        return None
    return np.rint(off).astype(int)


def sq_distance_transform(sites: SiteSet, spec: GridSpec) -> ScalarGrid:
    """``dist²(x, K)`` at every node of ``spec``.

    Point sites are measured exactly with a k-d tree; mask sites on an aligned
    lattice use the separable parabola sweep (node-to-node distances).
    """
    if sites.dim != spec.ndim:
        raise GridError(f"sites are {sites.dim}-dimensional, grid has {spec.ndim} axes")
    if sites.mask is not None:
        off = _mask_offset(sites, spec)
        if off is not None:
            cost = np.full(spec.dims, np.inf)
            src = []
            dst = []
            for o, n_mask, n_spec in zip(off, sites.mask.shape, spec.dims):
                lo, hi = max(o, 0), min(o + n_spec, n_mask)
                if lo >= hi:
                    break
                src.append(slice(lo, hi))
                dst.append(slice(lo - o, hi - o))
            else:
                cost[tuple(dst)] = np.where(sites.mask[tuple(src)], 0.0, np.inf)
            if np.isfinite(cost).any():
                return ScalarGrid(lower_envelope(cost, spec.spacing, 1.0), spec.origin, spec.spacing)
    tree = cKDTree(sites.coordinates())
    d, _ = tree.query(spec.node_coords().reshape(-1, spec.ndim))
    return ScalarGrid((d ** 2).reshape(spec.dims), spec.origin, spec.spacing)


_MAX_PADDED_NODES = 4_000_000


def _padded_distance(sites: SiteSet, spec: GridSpec, lam: float) -> ScalarGrid:
    # sample dist² itself (not an extension) on a grid grown by the locality radius
    f = sq_distance_transform(sites, spec)
    L = estimate_lipschitz(f).L
    pad = None
    for _ in range(2):
        pad = [int(math.ceil(locality_radius(L, lam) / h - 1e-9)) for h in spec.spacing]
        total = math.prod(d + 2 * p for d, p in zip(spec.dims, pad))
        if total > _MAX_PADDED_NODES:
            # dist² grows quadratically, so small lam on a large box asks for huge pads
            shrink = (_MAX_PADDED_NODES / total) ** (1.0 / spec.ndim)
            pad = [int(p * shrink) for p in pad]
            warnings.warn(f"locality pad capped at {pad} nodes per side; values near the grid boundary "
                          "may differ from the unbounded transform", ResolutionWarning, stacklevel=4)
        big = GridSpec(tuple(d + 2 * p for d, p in zip(spec.dims, pad)),
                       tuple(o - p * h for o, p, h in zip(spec.origin, pad, spec.spacing)), spec.spacing)
        g = sq_distance_transform(sites, big)
        L_big = estimate_lipschitz(g).L
        if L_big <= L * (1 + 1e-9) or total > _MAX_PADDED_NODES:
            break
        L = L_big
    return ScalarGrid(g.values, g.origin, g.spacing, tuple(pad))


def _resolution_warning(spec: GridSpec, lam: float) -> None:
    h = max(spec.spacing)
    if lam * h > RESOLUTION_RULE * (1 + 1e-9):
        warnings.warn(f"lam*h = {lam * h:.3g} exceeds {RESOLUTION_RULE}; the medial map is under-resolved",
                      ResolutionWarning, stacklevel=3)


def _ridge_of_distance(sites: SiteSet, lam: float, spec: GridSpec, refine: int) -> ScalarGrid:
    if not lam > 0:
        raise GridError(f"lambda must be positive, got {lam}")
    _resolution_warning(spec, lam)
    f = _padded_distance(sites, spec, lam)
    ridge = f - lower_transform(f, lam, refine)
    ridge = crop_margin(ridge, f.valid_margin)
    return ridge.with_values(np.maximum(ridge.values, 0.0))


def medial_axis_map(sites: SiteSet, lam: float, spec: GridSpec, refine: int = 1) -> ScalarGrid:
    """``(1 + lam) R_lam(dist²(., K))`` on the nodes of ``spec``.

    Roundoff-level negative ridge values are clipped to zero.
    """
    return _ridge_of_distance(sites, lam, spec, refine) * (1.0 + lam)


def medial_scale1_map(sites: SiteSet, lam: float, spec: GridSpec, refine: int = 1) -> ScalarGrid:
    """``lam R_lam(dist²(., K))``, the scale-1 ridge of the squared distance."""
    return _ridge_of_distance(sites, lam, spec, refine) * lam


def extract_medial_axis(medial_map: ScalarGrid, eps: float) -> np.ndarray:
    """Nodes where the medial map exceeds a user-chosen threshold."""
    return medial_map.values > eps


@dataclass
class ProbeComparison:
    probe: list
    dist2: float
    sq_limit: float
    dist_limit: float
    predicted_dist_limit: float
    formula_limit: float
    quotient_ok: bool
    grad_dist: list
    grad_sq_scaled: list
    gradient_ok: bool


@dataclass
class DistanceCheckReport:
    lambdas: list
    rel_tol: float
    probes: list = field(default_factory=list)
    passed: bool = True

    def to_json(self) -> dict:
        return asdict(self)


def distance_vs_sqdistance_check(sites: SiteSet, probes, lambdas, rel_tol: float = 0.05,
                                 grad_tol: float = 0.05, *, resolution: float = DEFAULT_RESOLUTION,
                                 refine: int = DEFAULT_REFINE) -> DistanceCheckReport:
    """Compare the scale-1 ridge limits of ``dist`` and ``dist²`` at probes off ``K``.

    Checks ``lim lam R(dist) = lim lam R(dist²) / (4 dist²)`` within ``rel_tol``
    and, at the largest ``lam``, ``grad C^l(dist) = grad C^l(dist²) / (2 dist)``
    within ``grad_tol``.
    """
    K = sites.coordinates()
    dist_fn, sq_fn = DistToPoints(K), SqDistToPoints(K)
    report = DistanceCheckReport([float(v) for v in lambdas], rel_tol)
    lam_max = float(lambdas[-1])
    for probe in probes:
        probe = np.atleast_1d(np.asarray(probe, dtype=float))
        d2 = float(sq_fn(probe))
        if d2 <= 1e-12:
            raise GridError(f"probe {probe.tolist()} lies on a site")
        sq_rep = landscape_sweep(sq_fn, [probe], lambdas, "ridge", resolution=resolution, refine=refine)[0]
        d_rep = landscape_sweep(dist_fn, [probe], lambdas, "ridge", resolution=resolution, refine=refine)[0]
        predicted = sq_rep.limit_estimate / (4.0 * d2)
        quotient_ok = abs(d_rep.limit_estimate - predicted) <= rel_tol * max(abs(predicted), abs(d_rep.limit_estimate)) + 1e-3
        g_d = gradient_field(lower_transform(probe_window(dist_fn, probe, lam_max, resolution), lam_max, refine)).at(probe)
        g_s = gradient_field(lower_transform(probe_window(sq_fn, probe, lam_max, resolution), lam_max, refine)).at(probe)
        g_s_scaled = g_s / (2.0 * math.sqrt(d2))
        gradient_ok = bool(np.linalg.norm(g_d - g_s_scaled) <= grad_tol)
        report.probes.append(ProbeComparison(
            probe.tolist(), d2, sq_rep.limit_estimate, d_rep.limit_estimate, predicted,
            medial_limit_formula(K, probe), bool(quotient_ok), g_d.tolist(), g_s_scaled.tolist(), gradient_ok))
        report.passed = report.passed and bool(quotient_ok) and gradient_ok
    return report
