"""Exact separable Moreau envelopes on uniform grids.

The lower envelope ``inf_z f(z) + lam |z - x|^2`` over grid nodes is computed
one axis at a time with the lower-envelope-of-parabolas sweep, which is exact
for the discrete problem and linear in the number of nodes per row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .grid import GridError, ScalarGrid

__all__ = [
    "MoreauParams",
    "moreau",
    "lower_envelope",
    "upper_envelope",
    "PiecewiseLinear",
    "convex_envelope_1d",
]


@numba.njit(cache=True, nogil=True)
def _envelope_row(f, xs, lam, xq, out, v, z):
    # out[p] = min_q f[q] + lam (xq[p] - xs[q])^2; xs, xq increasing; non-finite f[q] act as +inf
    n = f.shape[0]
    k = -1
    for q in range(n):
        fq = f[q]
        if not np.isfinite(fq):
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
            continue
        cq = fq + lam * xs[q] * xs[q]
        s = 0.0
        while k >= 0:
            p = v[k]
            s = (cq - (f[p] + lam * xs[p] * xs[p])) / (2.0 * lam * (xs[q] - xs[p]))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s if k > 0 else -np.inf
        z[k + 1] = np.inf
    if k < 0:
        for p in range(xq.shape[0]):
            out[p] = np.inf
        return
    k = 0
    for p in range(xq.shape[0]):
        while z[k + 1] < xq[p]:
            k += 1
        d = xq[p] - xs[v[k]]
        out[p] = f[v[k]] + lam * d * d


@numba.njit(cache=True, parallel=True)
def _envelope_rows(rows, xs, lam, xq, out):
    m, n = rows.shape
    for i in numba.prange(m):
        v = np.empty(n, dtype=np.int64)
        z = np.empty(n + 1, dtype=np.float64)
        _envelope_row(rows[i], xs, lam, xq, out[i], v, z)


def _envelope_axis(values: np.ndarray, lam: float, axis: int, xs: np.ndarray, xq: np.ndarray) -> np.ndarray:
    moved = np.ascontiguousarray(np.moveaxis(values, axis, -1))
    rows = moved.reshape(-1, moved.shape[-1])
    out = np.empty((rows.shape[0], xq.size))
    _envelope_rows(rows, xs, lam, xq, out)
    return np.moveaxis(out.reshape(moved.shape[:-1] + (xq.size,)), -1, axis)


def _lattice(n: int, h: float) -> np.ndarray:
    # coordinates relative to the first node keep f + lam x^2 well scaled
    return h * np.arange(n, dtype=np.float64)


def lower_envelope(values: np.ndarray, spacing, lam: float, refine: int = 1) -> np.ndarray:
    """``min_z values[z] + lam |x_z - y|^2`` over all nodes ``z``, separably.

    With ``refine > 1`` the result is evaluated on the lattice ``refine`` times
    finer than the input (``refine * (n - 1) + 1`` points per axis, containing
    the input nodes).
    """
    out = np.asarray(values, dtype=np.float64)
    for axis, h in enumerate(spacing):
        n = out.shape[axis]
        xs = _lattice(n, h)
        xq = xs if refine == 1 else _lattice(refine * (n - 1) + 1, h / refine)
        out = _envelope_axis(out, lam, axis, xs, xq)
    return out


def upper_envelope(values: np.ndarray, spacing, lam: float, coarsen: int = 1) -> np.ndarray:
    """``max_z values[z] - lam |x_z - y|^2``, i.e. ``-lower_envelope(-values)``.

    ``coarsen`` is the inverse of ``refine``: the input lives on a lattice with
    spacing ``spacing / coarsen`` and the result on every ``coarsen``-th point.
    """
    out = -np.asarray(values, dtype=np.float64)
    for axis, h in enumerate(spacing):
        n = out.shape[axis]
        xs = _lattice(n, h / coarsen)
        xq = xs if coarsen == 1 else _lattice((n - 1) // coarsen + 1, h)
        out = _envelope_axis(out, lam, axis, xs, xq)
    return -out


@dataclass(frozen=True)
class MoreauParams:
    lam: float
    direction: str = "lower"

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise GridError(f"lambda must be positive and finite, got {self.lam}")
        if self.direction not in ("lower", "upper"):
            raise GridError(f"direction must be 'lower' or 'upper', got {self.direction!r}")


def moreau(f: ScalarGrid, params: MoreauParams) -> ScalarGrid:
    """Discrete Moreau envelope of a grid function.

    ``lower``: ``inf_z f(z) + lam |z - x|^2``; ``upper``: ``sup_z f(z) - lam |z - x|^2``,
    both over grid nodes ``z``. No padding is applied.
    """
    if params.direction == "lower":
        out = lower_envelope(f.values, f.spacing, params.lam)
    else:
        out = upper_envelope(f.values, f.spacing, params.lam)
    return f.with_values(out)


class PiecewiseLinear:
    """Continuous piecewise-linear function through sorted breakpoints."""

    def __init__(self, xs, ys):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)

    def __repr__(self):
        return f"PiecewiseLinear({len(self.xs)} breakpoints)"


def convex_envelope_1d(xs, ys) -> PiecewiseLinear:
    """Lower convex hull of the points ``(xs[i], ys[i])`` (monotone chain).

    Used as an independent check on the transforms in 1D, not in production paths.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ValueError("need two equal-length 1D arrays with at least 2 points")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")
    hull: list[int] = []
    for i in range(xs.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return PiecewiseLinear(xs[hull], ys[hull])
