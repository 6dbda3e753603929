"""Uniform-grid scalar fields, Lipschitz estimation, locality padding and I/O."""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "GridError",
    "GridSpec",
    "ScalarGrid",
    "LipschitzEstimate",
    "estimate_lipschitz",
    "locality_radius",
    "pad_for_locality",
    "crop_margin",
    "read_grid",
    "write_grid",
    "read_pgm_mask",
    "read_points_csv",
]


class GridError(ValueError):
    """Raised for malformed grids, grid files and invalid grid parameters."""


def _as_tuple(value, ndim: int, cast=float) -> tuple:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1 and ndim > 1:
        arr = np.repeat(arr, ndim)
    if arr.size != ndim:
        raise GridError(f"expected {ndim} per-axis entries, got {arr.size}")
    return tuple(cast(v) for v in arr)


@dataclass(frozen=True)
class GridSpec:
    """Node layout of a uniform grid: node ``i`` sits at ``origin + i * spacing``."""

    dims: tuple[int, ...]
    origin: tuple[float, ...]
    spacing: tuple[float, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in np.atleast_1d(self.dims))
        ndim = len(dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", _as_tuple(self.origin, ndim))
        object.__setattr__(self, "spacing", _as_tuple(self.spacing, ndim))
        if any(d < 1 for d in dims):
            raise GridError(f"dims must be positive, got {dims}")
        if any(not (h > 0 and math.isfinite(h)) for h in self.spacing):
            raise GridError(f"spacing must be positive and finite, got {self.spacing}")
        if not all(math.isfinite(o) for o in self.origin):
            raise GridError(f"origin must be finite, got {self.origin}")

    @classmethod
    def centered(cls, centre, half_nodes, spacing) -> "GridSpec":
        """Grid with a node exactly at ``centre`` and ``half_nodes`` nodes on each side."""
        centre = np.atleast_1d(np.asarray(centre, dtype=float))
        ndim = centre.size
        half = np.asarray(_as_tuple(half_nodes, ndim, int))
        h = np.asarray(_as_tuple(spacing, ndim))
        return cls(tuple(2 * half + 1), tuple(centre - half * h), tuple(h))

    @classmethod
    def from_bounds(cls, lower, upper, spacing) -> "GridSpec":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        h = np.asarray(_as_tuple(spacing, lower.size))
        dims = np.floor((upper - lower) / h + 1e-9).astype(int) + 1
        return cls(tuple(dims), tuple(lower), tuple(h))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.dims[axis])

    def node_coords(self) -> np.ndarray:
        """Coordinates of all nodes, shape ``dims + (ndim,)``."""
        axes = [self.axis_coords(k) for k in range(self.ndim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def index_of(self, point, atol: float = 1e-6) -> tuple[int, ...]:
        """Index of the node at ``point``; raises if ``point`` is not (close to) a node."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.size != self.ndim:
            raise GridError(f"point has {point.size} coordinates, grid has {self.ndim} axes")
        fidx = (point - np.asarray(self.origin)) / np.asarray(self.spacing)
        idx = np.rint(fidx).astype(int)
        if np.any(np.abs(fidx - idx) > atol):
            raise GridError(f"point {tuple(point)} is not a grid node")
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.dims)):
            raise GridError(f"point {tuple(point)} lies outside the grid")
        return tuple(int(i) for i in idx)


@dataclass(frozen=True)
class ScalarGrid:
    """Real values sampled on a uniform grid.

    Instances are immutable; the ``values`` array is flagged read-only.
    ``valid_margin`` counts, per axis, the boundary nodes whose transform
    values are influenced by padding. It is metadata only.
    """

    values: np.ndarray
    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    valid_margin: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim == 0:
            raise GridError("a grid needs at least one axis")
        ndim = values.ndim
        spec = GridSpec(values.shape, self.origin, self.spacing)
        margin = (0,) * ndim if self.valid_margin is None else _as_tuple(self.valid_margin, ndim, int)
        if any(m < 0 or 2 * m > d for m, d in zip(margin, values.shape)):
            raise GridError(f"valid_margin {margin} incompatible with dims {values.shape}")
        if not np.all(np.isfinite(values)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
            raise GridError(f"non-finite value at {bad}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", spec.origin)
        object.__setattr__(self, "spacing", spec.spacing)
        object.__setattr__(self, "valid_margin", margin)

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], spec: GridSpec) -> "ScalarGrid":
        """Sample ``func`` (mapping an ``(..., d)`` coordinate array to values) at every node."""
        return cls(func(spec.node_coords()), spec.origin, spec.spacing)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.dims, self.origin, self.spacing)

    def with_values(self, values, valid_margin=None) -> "ScalarGrid":
        margin = self.valid_margin if valid_margin is None else valid_margin
        return ScalarGrid(values, self.origin, self.spacing, margin)

    def node_coords(self) -> np.ndarray:
        return self.spec.node_coords()

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.spec.axis_coords(axis)

    def index_of(self, point) -> tuple[int, ...]:
        return self.spec.index_of(point)

    def value_at(self, point) -> float:
        return float(self.values[self.index_of(point)])

    def valid_slice(self) -> tuple[slice, ...]:
        return tuple(slice(m, d - m) for m, d in zip(self.valid_margin, self.dims))

    def valid_values(self) -> np.ndarray:
        return self.values[self.valid_slice()]

    def __neg__(self) -> "ScalarGrid":
        return self.with_values(-self.values)

    def __add__(self, other) -> "ScalarGrid":
        if isinstance(other, ScalarGrid):
            _check_aligned(self, other)
            return self.with_values(self.values + other.values,
                                    tuple(max(a, b) for a, b in zip(self.valid_margin, other.valid_margin)))
        return self.with_values(self.values + other)

    def __sub__(self, other) -> "ScalarGrid":
        if isinstance(other, ScalarGrid):
            return self + (-other)
        return self.with_values(self.values - other)

    def __mul__(self, scalar: float) -> "ScalarGrid":
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__


def _check_aligned(a: ScalarGrid, b: ScalarGrid) -> None:
    if a.dims != b.dims or not np.allclose(a.origin, b.origin) or not np.allclose(a.spacing, b.spacing):
        raise GridError("grids are not aligned")


@dataclass(frozen=True)
class LipschitzEstimate:
    """Largest adjacent-node slope of a sampled function."""

    L: float

    def __post_init__(self):
        if not (self.L >= 0 and math.isfinite(self.L)):
            raise GridError(f"Lipschitz constant must be finite and >= 0, got {self.L}")


def estimate_lipschitz(f: ScalarGrid) -> LipschitzEstimate:
    """Max over axes and adjacent node pairs of ``|f(p) - f(q)| / spacing``."""
    if any(d < 2 for d in f.dims):
        raise GridError(f"need at least 2 nodes per axis to estimate a slope, got dims {f.dims}")
    slopes = [np.max(np.abs(np.diff(f.values, axis=k))) / f.spacing[k] for k in range(f.ndim)]
    return LipschitzEstimate(float(max(slopes)))


def locality_radius(L: float, lam: float) -> float:
    """Radius ``(2 + sqrt 2) L / lam`` beyond which values cannot influence a transform."""
    if not lam > 0:
        raise GridError(f"lambda must be positive, got {lam}")
    return (2.0 + math.sqrt(2.0)) * L / lam


def pad_for_locality(f: ScalarGrid, L: LipschitzEstimate | float, lam: float) -> ScalarGrid:
    """Extend ``f`` by the locality radius on every side.

    Padded values are ``f(nearest boundary node) + L * dist(x, original box)``,
    a Lipschitz extension that keeps the per-axis slope at most ``L``. The
    returned grid has ``valid_margin`` equal to the added node count.
    """
    Lval = L.L if isinstance(L, LipschitzEstimate) else float(L)
    radius = locality_radius(Lval, lam)
    pad = tuple(int(math.ceil(radius / h - 1e-9)) for h in f.spacing)
    if not any(pad):
        return f
    values = np.pad(f.values, [(p, p) for p in pad], mode="edge")
    dist2 = np.zeros(values.shape)
    for k, (p, n, h) in enumerate(zip(pad, f.dims, f.spacing)):
        idx = np.arange(n + 2 * p)
        outside = np.maximum(p - idx, 0) + np.maximum(idx - (p + n - 1), 0)
        shape = [1] * f.ndim
        shape[k] = -1
        dist2 = dist2 + ((outside * h) ** 2).reshape(shape)
    values = values + Lval * np.sqrt(dist2)
    origin = tuple(o - p * h for o, p, h in zip(f.origin, pad, f.spacing))
    margin = tuple(m + p for m, p in zip(f.valid_margin, pad))
    return ScalarGrid(values, origin, f.spacing, margin)


def crop_margin(f: ScalarGrid, margin: Sequence[int]) -> ScalarGrid:
    """Drop ``margin[k]`` nodes from both ends of axis ``k``."""
    margin = tuple(int(m) for m in margin)
    sl = tuple(slice(m, d - m) for m, d in zip(margin, f.dims))
    origin = tuple(o + m * h for o, m, h in zip(f.origin, margin, f.spacing))
    left = tuple(max(v - m, 0) for v, m in zip(f.valid_margin, margin))
    return ScalarGrid(f.values[sl], origin, f.spacing, left)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

_CSV_HEADER = re.compile(r"^#\s*ccx-grid\s+d=(\S+)\s+origin=(\S+)\s+spacing=(\S+)\s*$")
_MAGIC = b"CCXG"


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt:
        return fmt.lower()
    suffix = path.suffix.lower()
    return {".csv": "csv", ".bin": "bin", ".ccxg": "bin", ".pgm": "pgm"}.get(suffix, "csv")


def _join(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def write_grid(grid: ScalarGrid, path, fmt: str | None = None) -> None:
    """Write ``grid`` as ``csv``, ``bin`` or ``pgm`` (2D only, lossy)."""
    path = Path(path)
    fmt = _infer_format(path, fmt)
    if fmt == "csv":
        lines = [f"# ccx-grid d={'x'.join(str(d) for d in grid.dims)} "
                 f"origin={_join(grid.origin)} spacing={_join(grid.spacing)}"]
        rows = grid.values.reshape(-1, grid.dims[-1])
        lines.extend(",".join(repr(float(v)) for v in row) for row in rows)
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "bin":
        parts = [_MAGIC, struct.pack("<I", grid.ndim)]
        for d, o, h in zip(grid.dims, grid.origin, grid.spacing):
            parts.append(struct.pack("<Qdd", d, o, h))
        parts.append(np.ascontiguousarray(grid.values, dtype="<f8").tobytes())
        path.write_bytes(b"".join(parts))
    elif fmt == "pgm":
        _write_pgm(grid, path)
    else:
        raise GridError(f"unknown grid format {fmt!r}")


def read_grid(path, fmt: str | None = None) -> ScalarGrid:
    path = Path(path)
    fmt = _infer_format(path, fmt)
    if fmt == "csv":
        return _read_csv(path)
    if fmt == "bin":
        return _read_bin(path)
    if fmt == "pgm":
        levels, maxval = _read_pgm(path)
        return ScalarGrid(levels.astype(float) / maxval, (0.0, 0.0), (1.0, 1.0))
    raise GridError(f"unknown grid format {fmt!r}")


def _read_csv(path: Path) -> ScalarGrid:
    with open(path) as fh:
        header = fh.readline().strip()
        m = _CSV_HEADER.match(header)
        if not m:
            raise GridError(f"{path}: malformed header {header!r}")
        try:
            dims = tuple(int(v) for v in m.group(1).split("x"))
            origin = tuple(float(v) for v in m.group(2).split(","))
            spacing = tuple(float(v) for v in m.group(3).split(","))
        except ValueError as exc:
            raise GridError(f"{path}: malformed header {header!r}") from exc
        if not (len(dims) == len(origin) == len(spacing)):
            raise GridError(f"{path}: header axis counts disagree")
        rows = []
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise GridError(f"{path}: unparsable row {len(rows)}") from exc
    ncol = dims[-1]
    nrow = int(np.prod(dims[:-1])) if len(dims) > 1 else 1
    if len(rows) != nrow or any(len(r) != ncol for r in rows):
        raise GridError(f"{path}: dimension mismatch, header says {dims}")
    values = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(values)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
        raise GridError(f"non-finite value at {bad}")
    return ScalarGrid(values.reshape(dims), origin, spacing)


def _read_bin(path: Path) -> ScalarGrid:
    data = path.read_bytes()
    if data[:4] != _MAGIC or len(data) < 8:
        raise GridError(f"{path}: bad magic, not a CCXG file")
    (ndim,) = struct.unpack_from("<I", data, 4)
    offset = 8
    dims, origin, spacing = [], [], []
    for _ in range(ndim):
        if offset + 24 > len(data):
            raise GridError(f"{path}: truncated header")
        d, o, h = struct.unpack_from("<Qdd", data, offset)
        dims.append(d)
        origin.append(o)
        spacing.append(h)
        offset += 24
    n = int(np.prod(dims))
    if len(data) - offset != 8 * n:
        raise GridError(f"{path}: dimension mismatch, expected {n} values")
    values = np.frombuffer(data, dtype="<f8", count=n, offset=offset).reshape(dims)
    return ScalarGrid(values, tuple(origin), tuple(spacing))


def _write_pgm(grid: ScalarGrid, path: Path, binary: bool = True) -> None:
    if grid.ndim != 2:
        raise GridError("PGM export needs a 2D grid")
    lo, hi = float(grid.values.min()), float(grid.values.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    levels = np.rint((grid.values - lo) * scale).astype(np.uint8)
    rows, cols = grid.dims
    header = f"{'P5' if binary else 'P2'}\n# ccx linear rescale min={lo!r} max={hi!r}\n{cols} {rows}\n255\n"
    if binary:
        path.write_bytes(header.encode("ascii") + levels.tobytes())
    else:
        body = "\n".join(" ".join(str(v) for v in row) for row in levels)
        path.write_text(header + body + "\n")


def _read_pgm(path: Path) -> tuple[np.ndarray, int]:
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    # magic, width, height, maxval; comments may appear between tokens
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise GridError(f"{path}: truncated PGM header")
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    magic = tokens[0]
    try:
        cols, rows, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise GridError(f"{path}: malformed PGM header") from exc
    if magic == b"P5":
        dtype = np.uint8 if maxval < 256 else ">u2"
        body = np.frombuffer(data, dtype=dtype, count=rows * cols, offset=pos + 1)
    elif magic == b"P2":
        body = np.array(data[pos:].split(), dtype=int)
    else:
        raise GridError(f"{path}: not a PGM file")
    if body.size != rows * cols:
        raise GridError(f"{path}: dimension mismatch")
    return body.reshape(rows, cols).astype(int), maxval


def read_pgm_mask(path) -> np.ndarray:
    """Boolean mask of the nonzero pixels of a PGM image."""
    levels, _ = _read_pgm(Path(path))
    return levels != 0


def read_points_csv(path) -> np.ndarray:
    """Points file: one point per line, comma-separated coordinates."""
    pts = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            pts.append([float(v) for v in line.split(",")])
        except ValueError as exc:
            raise GridError(f"{path}:{lineno}: unparsable point") from exc
    if not pts:
        raise GridError(f"{path}: no points")
    if len({len(p) for p in pts}) != 1:
        raise GridError(f"{path}: points have differing dimensions")
    arr = np.asarray(pts, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise GridError(f"{path}: non-finite coordinate")
    return arr
