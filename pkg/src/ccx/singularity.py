"""Ridge, valley and edge transforms, scale-1 maps and their large-lambda limits."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .grid import GridError, GridSpec, ScalarGrid, estimate_lipschitz, locality_radius
from .oracle import DCPair, OracleError, TestFunction, predicted_landscape, sample
from .transforms import lower_transform, upper_transform

__all__ = [
    "SINGULAR_KINDS",
    "singular_map",
    "scale1_map",
    "SweepReport",
    "landscape_sweep",
    "probe_window",
    "GradientField",
    "gradient_field",
    "gradient_upper",
    "gradient_lower",
    "GradientLipschitzReport",
    "gradient_lipschitz_check",
    "DCEdgeReport",
    "dc_edge_bound",
    "geometric_schedule",
]

SINGULAR_KINDS = ("ridge", "valley", "edge")
RESOLUTION_RULE = 0.1
DEFAULT_RESOLUTION = 0.025
DEFAULT_REFINE = 2


def _check_kind(kind: str) -> str:
    if kind not in SINGULAR_KINDS:
        raise GridError(f"unknown singularity kind {kind!r}; expected one of {SINGULAR_KINDS}")
    return kind


def singular_map(f: ScalarGrid, lam: float, kind: str, refine: int = 1) -> ScalarGrid:
    """``ridge = f - C^l``, ``valley = C^u - f``, ``edge = C^u - C^l``."""
    _check_kind(kind)
    if kind == "ridge":
        return f - lower_transform(f, lam, refine)
    if kind == "valley":
        return upper_transform(f, lam, refine) - f
    return upper_transform(f, lam, refine) - lower_transform(f, lam, refine)


def scale1_map(f: ScalarGrid, lam: float, kind: str, refine: int = 1) -> ScalarGrid:
    """``lam`` times :func:`singular_map`."""
    return singular_map(f, lam, kind, refine) * lam


def geometric_schedule(start: float, factor: float, end: float) -> list[float]:
    """``start, start*factor, ...`` up to and including ``end`` (``a:r:b`` notation)."""
    if not (start > 0 and factor > 1 and end >= start):
        raise GridError(f"invalid schedule {start}:{factor}:{end}; need start > 0, factor > 1, end >= start")
    out = [float(start)]
    while out[-1] * factor <= end * (1 + 1e-12):
        out.append(out[-1] * factor)
    return out


@dataclass
class SweepReport:
    probe: list
    lambdas: list
    values: list
    limit_estimate: float
    converged: bool
    spacing_used: list
    kind: str = "valley"
    extrapolated: bool = False
    warnings: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


Source = Union[TestFunction, ScalarGrid, Callable[[float], ScalarGrid]]


_MAX_HALF_NODES = {1: 20000, 2: 600, 3: 60}


def probe_window(tf: TestFunction, probe, lam: float, resolution: float = DEFAULT_RESOLUTION) -> ScalarGrid:
    """Sample ``tf`` on a grid centred at ``probe`` with ``h = resolution / lam``.

    The half-width is the locality radius for the Lipschitz constant measured
    near the probe, re-measured once on the window itself. Functions of
    super-linear growth (``dist²``) would otherwise grow the window forever.
    """
    h = resolution / lam
    probe = np.atleast_1d(np.asarray(probe, dtype=float))
    cap = _MAX_HALF_NODES.get(probe.size, 20)
    L = estimate_lipschitz(sample(tf, GridSpec.centered(probe, 10, h))).L
    for _ in range(2):
        half = min(int(math.ceil(locality_radius(L, lam) / h)) + 5, cap)
        grid = sample(tf, GridSpec.centered(probe, half, h))
        L_win = estimate_lipschitz(grid).L
        if L_win <= L * (1 + 1e-9):
            break
        L = L_win
    return grid


def _converged(values: Sequence[float], rel: float = 0.01, floor: float = 1e-9) -> bool:
    if len(values) < 2:
        return False
    a, b = values[-2], values[-1]
    return abs(b - a) < max(rel * abs(b), floor)


def _limit(lambdas, values, extrapolate: bool) -> float:
    if extrapolate and len(values) >= 2:
        l1, l2 = lambdas[-2], lambdas[-1]
        return (l2 * values[-1] - l1 * values[-2]) / (l2 - l1)
    return values[-1]


def landscape_sweep(source: Source, probes, lambdas, kind: str = "valley", *,
                    resolution: float = DEFAULT_RESOLUTION, refine: int = DEFAULT_REFINE,
                    extrapolate: bool = False) -> list[SweepReport]:
    """Scale-1 values ``lam * T_lam(f)(probe)`` along an increasing ``lam`` schedule.

    ``source`` may be a :class:`TestFunction` (sampled per ``lam`` on a window
    around each probe with ``lam * h = resolution``), a fixed
    :class:`ScalarGrid`, or a callable returning a grid for each ``lam``.
    Grids violating ``lam * h <= 0.1`` produce a warning in the report.
    """
    _check_kind(kind)
    lambdas = [float(v) for v in lambdas]
    if not lambdas or any(v <= 0 for v in lambdas) or any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise GridError("lambdas must be positive and strictly increasing")
    probes = [np.atleast_1d(np.asarray(p, dtype=float)) for p in probes]
    if isinstance(source, TestFunction) and resolution > RESOLUTION_RULE:
        raise GridError(f"resolution {resolution} violates lam*h <= {RESOLUTION_RULE}")
    reports = []
    for probe in probes:
        values, spacings, warnings = [], [], []
        for lam in lambdas:
            if isinstance(source, TestFunction):
                grid = probe_window(source, probe, lam, resolution)
            elif isinstance(source, ScalarGrid):
                grid = source
            else:
                grid = source(lam)
            h = max(grid.spacing)
            if lam * h > RESOLUTION_RULE * (1 + 1e-9):
                warnings.append(f"lambda={lam:g}: lam*h={lam * h:.3g} exceeds {RESOLUTION_RULE}")
            m = singular_map(grid, lam, kind, refine)
            values.append(lam * m.value_at(probe))
            spacings.append(h)
        reports.append(SweepReport(
            probe=probe.tolist(), lambdas=lambdas, values=values,
            limit_estimate=float(_limit(lambdas, values, extrapolate)),
            converged=_converged(values), spacing_used=spacings, kind=kind,
            extrapolated=extrapolate, warnings=warnings))
    return reports


@dataclass(frozen=True)
class GradientField:
    """One grid per axis; ``one_sided`` marks nodes where some component used a one-sided difference."""

    components: tuple
    one_sided: np.ndarray

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i) -> ScalarGrid:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def at(self, point) -> np.ndarray:
        idx = self.components[0].index_of(point)
        return np.array([c.values[idx] for c in self.components])


def gradient_field(u: ScalarGrid) -> GradientField:
    """Central differences in the interior, first-order one-sided at the boundary."""
    if any(d < 3 for d in u.dims):
        raise GridError(f"need at least 3 nodes per axis for central differences, got {u.dims}")
    grads = np.gradient(u.values, *u.spacing)
    if u.ndim == 1:
        grads = [grads]
    one_sided = np.zeros(u.dims, dtype=bool)
    for k in range(u.ndim):
        edge = [slice(None)] * u.ndim
        edge[k] = [0, -1]
        one_sided[tuple(edge)] = True
    return GradientField(tuple(u.with_values(g) for g in grads), one_sided)


def gradient_upper(f: ScalarGrid, lam: float, refine: int = 1) -> GradientField:
    return gradient_field(upper_transform(f, lam, refine))


def gradient_lower(f: ScalarGrid, lam: float, refine: int = 1) -> GradientField:
    return gradient_field(lower_transform(f, lam, refine))


@dataclass
class GradientLipschitzReport:
    max_ratio: float
    bound: float
    rel_tol: float
    passed: bool


def gradient_lipschitz_check(f: ScalarGrid, lam: float, rel_tol: float = 0.05,
                             refine: int = 1) -> GradientLipschitzReport:
    """Largest ``|grad(p) - grad(q)| / |p - q|`` over adjacent interior nodes of ``C^u_lam(f)``.

    Passes when it does not exceed ``2 lam (1 + rel_tol)``.
    """
    field_ = gradient_upper(f, lam, refine)
    G = np.stack([c.values for c in field_], axis=-1)
    ok = ~field_.one_sided
    best = 0.0
    for k, h in enumerate(f.spacing):
        a = [slice(None)] * f.ndim
        b = [slice(None)] * f.ndim
        a[k], b[k] = slice(None, -1), slice(1, None)
        a, b = tuple(a), tuple(b)
        ratio = np.linalg.norm(G[b] - G[a], axis=-1) / h
        mask = ok[a] & ok[b]
        if mask.any():
            best = max(best, float(ratio[mask].max()))
    bound = 2.0 * lam
    return GradientLipschitzReport(best, bound, rel_tol, best <= bound * (1 + rel_tol))


@dataclass
class DCEdgeReport:
    probe: list
    lambdas: list
    values: list
    tail_min: float
    r_g: float
    r_h: float
    bound: float
    tol: float
    holds: bool
    warnings: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def dc_edge_bound(g: TestFunction, h: TestFunction, probe, lambdas, tol: float = 0.01, *,
                  resolution: float = DEFAULT_RESOLUTION, refine: int = DEFAULT_REFINE) -> DCEdgeReport:
    """Compare the scale-1 edge sweep of ``g - h`` with ``(r_g - r_h)^2 / 4``.

    ``r_g`` and ``r_h`` are minimal-bounding-sphere radii of the
    subdifferentials of the convex components at ``probe``. The liminf is
    approximated by the minimum over the second half of the sweep.
    """
    if not (g.is_convex and h.is_convex):
        raise OracleError("dc_edge_bound needs convex g and h")
    f = DCPair(g, h)
    report = landscape_sweep(f, [probe], lambdas, "edge", resolution=resolution, refine=refine)[0]
    tail = report.values[len(report.values) // 2:]
    r_g = predicted_landscape(g, probe).radius
    r_h = predicted_landscape(h, probe).radius
    bound = (r_g - r_h) ** 2 / 4.0
    tail_min = float(min(tail))
    return DCEdgeReport(report.probe, report.lambdas, report.values, tail_min, r_g, r_h, bound, tol,
                        tail_min >= bound - tol, report.warnings)
