import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccx.grid import (GridError, GridSpec, ScalarGrid, crop_margin, estimate_lipschitz, locality_radius,
                      pad_for_locality, read_grid, read_pgm_mask, read_points_csv, write_grid)
from ccx.transforms import lower_transform, upper_transform

from conftest import random_lipschitz_grid


def test_gridspec_from_bounds_and_coords():
    spec = GridSpec.from_bounds([-1.0], [1.0], [0.5])
    assert spec.dims == (5,)
    np.testing.assert_allclose(spec.axis_coords(0), [-1, -0.5, 0, 0.5, 1])
    assert spec.index_of([0.5]) == (3,)
    with pytest.raises(GridError, match="not a grid node"):
        spec.index_of([0.25])
    with pytest.raises(GridError, match="outside"):
        spec.index_of([1.5])


def test_centered_spec_is_symmetric():
    spec = GridSpec.centered([0.3, -0.2], 4, 0.1)
    assert spec.dims == (9, 9)
    coords = spec.node_coords()
    np.testing.assert_allclose(coords[4, 4], [0.3, -0.2])


def test_scalar_grid_is_read_only():
    g = ScalarGrid(np.zeros(4), (0.0,), (1.0,))
    with pytest.raises(ValueError):
        g.values[0] = 1.0


def test_nan_rejected_with_position():
    vals = np.zeros((3, 3))
    vals[1, 2] = np.nan
    with pytest.raises(GridError, match=r"non-finite value at \(1, 2\)"):
        ScalarGrid(vals, (0.0, 0.0), (1.0, 1.0))


def test_arithmetic_requires_alignment():
    a = ScalarGrid(np.ones(3), (0.0,), (1.0,))
    b = ScalarGrid(np.ones(3), (0.5,), (1.0,))
    with pytest.raises(GridError, match="aligned"):
        a + b
    np.testing.assert_array_equal((a + a).values, 2.0)
    np.testing.assert_array_equal((3 * a - a).values, 2.0)


def test_lipschitz_examples():
    absx = ScalarGrid.from_function(lambda x: np.abs(x[..., 0]), GridSpec.from_bounds([-1], [1], [0.01]))
    assert estimate_lipschitz(absx).L == pytest.approx(1.0, abs=1e-12)
    const = ScalarGrid(np.full((5, 6), 3.0), (0, 0), (0.1, 0.1))
    assert estimate_lipschitz(const).L == 0.0
    lin = ScalarGrid.from_function(lambda x: 2 * x[..., 0], GridSpec.from_bounds([0], [1], [0.1]))
    assert estimate_lipschitz(lin).L == pytest.approx(2.0, abs=1e-12)


def test_lipschitz_needs_two_nodes():
    with pytest.raises(GridError):
        estimate_lipschitz(ScalarGrid(np.zeros((1, 4)), (0, 0), (1, 1)))


def test_locality_radius_examples():
    assert locality_radius(1.0, 10.0) == pytest.approx(0.34142135, abs=1e-8)
    assert locality_radius(0.0, 5.0) == 0.0
    with pytest.raises(GridError):
        locality_radius(1.0, 0.0)


def test_pad_width_example():
    f = ScalarGrid(np.linspace(0, 1, 11), (0.0,), (0.1,))
    padded = pad_for_locality(f, 1.0, 1.0)
    assert padded.dims == (11 + 2 * 35,)
    assert padded.valid_margin == (35,)
    np.testing.assert_array_equal(padded.valid_values(), f.values)
    assert padded.origin[0] == pytest.approx(-3.5)


def test_pad_constant_has_zero_width():
    f = ScalarGrid(np.full(7, 2.0), (0.0,), (0.1,))
    assert pad_for_locality(f, 0.0, 3.0) is f


def test_pad_rejects_nonpositive_lambda():
    f = ScalarGrid(np.zeros(4), (0.0,), (1.0,))
    with pytest.raises(GridError):
        pad_for_locality(f, 1.0, -1.0)


@pytest.mark.parametrize("seed", range(20))
def test_pad_preserves_lipschitz(seed):
    f = random_lipschitz_grid(seed)
    L = estimate_lipschitz(f)
    padded = pad_for_locality(f, L, 4.0)
    assert estimate_lipschitz(padded).L <= L.L + 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_locality_pad_r_vs_2r(seed):
    f = random_lipschitz_grid(seed)
    lam = 6.0
    L = estimate_lipschitz(f).L
    results = []
    for width in (lam, lam / 2.0):
        # same slope-L extension, pad width r_lam and then 2 r_lam
        padded = pad_for_locality(f, L, width)
        out = lower_transform(padded, lam)
        results.append(crop_margin(out, padded.valid_margin).values)
    tol = 1e-9 * max(1.0, np.abs(f.values).max())
    np.testing.assert_allclose(results[0], results[1], atol=tol, rtol=0)


def test_crop_margin_round_trip():
    f = random_lipschitz_grid(3)
    padded = pad_for_locality(f, estimate_lipschitz(f), 5.0)
    back = crop_margin(padded, padded.valid_margin)
    np.testing.assert_array_equal(back.values, f.values)
    np.testing.assert_allclose(back.origin, f.origin)
    assert back.valid_margin == (0,) * f.ndim


def test_binary_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(7)
    g = ScalarGrid(rng.normal(size=(64, 64)), (-1.25, 0.5), (0.03, 0.07))
    write_grid(g, tmp_path / "g.bin")
    back = read_grid(tmp_path / "g.bin")
    assert back.values.tobytes() == g.values.tobytes()
    assert back.origin == g.origin and back.spacing == g.spacing


def test_binary_header_layout(tmp_path):
    g = ScalarGrid(np.arange(6.0).reshape(2, 3), (1.0, 2.0), (0.5, 0.25))
    write_grid(g, tmp_path / "g.bin")
    raw = (tmp_path / "g.bin").read_bytes()
    assert raw[:4] == b"CCXG"
    assert int.from_bytes(raw[4:8], "little") == 2
    assert len(raw) == 4 + 4 + 2 * (8 + 8 + 8) + 6 * 8


def test_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(8)
    g = ScalarGrid(rng.normal(size=(5, 4, 3)), (0.0, 1.0, 2.0), (0.1, 0.2, 0.3))
    write_grid(g, tmp_path / "g.csv")
    text = (tmp_path / "g.csv").read_text().splitlines()
    assert text[0].startswith("# ccx-grid d=5x4x3 ")
    back = read_grid(tmp_path / "g.csv")
    np.testing.assert_array_equal(back.values, g.values)


def test_csv_nan_cell_error(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# ccx-grid d=2x2 origin=0,0 spacing=1,1\n1.0,2.0\n3.0,nan\n")
    with pytest.raises(GridError, match=r"non-finite value at \(1, 1\)"):
        read_grid(path)


def test_csv_malformed_header_and_shape(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1.0,2.0\n")
    with pytest.raises(GridError, match="malformed header"):
        read_grid(path)
    path.write_text("# ccx-grid d=2x3 origin=0,0 spacing=1,1\n1.0,2.0\n3.0,4.0\n")
    with pytest.raises(GridError, match="dimension mismatch"):
        read_grid(path)


def test_pgm_levels(tmp_path):
    vals = np.linspace(0.0, 1.0, 256).reshape(16, 16)
    g = ScalarGrid(vals, (0.0, 0.0), (1.0, 1.0))
    write_grid(g, tmp_path / "g.pgm")
    back = read_grid(tmp_path / "g.pgm")
    levels = np.rint(back.values * 255).astype(int)
    assert levels.min() == 0 and levels.max() == 255
    np.testing.assert_array_equal(levels.ravel(), np.arange(256))
    assert b"min=" in (tmp_path / "g.pgm").read_bytes()[:200]


def test_pgm_mask_and_points(tmp_path):
    mask = np.zeros((4, 5))
    mask[1, 2] = 1.0
    write_grid(ScalarGrid(mask, (0, 0), (1, 1)), tmp_path / "m.pgm")
    m = read_pgm_mask(tmp_path / "m.pgm")
    assert m.dtype == bool and m.sum() == 1 and m[1, 2]
    (tmp_path / "p.csv").write_text("# sites\n1,0\n-1,0\n")
    np.testing.assert_array_equal(read_points_csv(tmp_path / "p.csv"), [[1, 0], [-1, 0]])


def test_unknown_format(tmp_path):
    g = ScalarGrid(np.zeros(3), (0.0,), (1.0,))
    with pytest.raises(GridError, match="unknown grid format"):
        write_grid(g, tmp_path / "g.csv", "xyz")
    with pytest.raises(GridError, match="unknown grid format"):
        read_grid(tmp_path / "g.csv", "xyz")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40),
       st.floats(-10, 10), st.floats(1e-3, 10))
def test_csv_round_trip_property(tmp_path_factory, values, origin, spacing):
    path = tmp_path_factory.mktemp("rt") / "g.csv"
    g = ScalarGrid(np.array(values), (origin,), (spacing,))
    write_grid(g, path)
    back = read_grid(path)
    np.testing.assert_array_equal(back.values, g.values)
    assert back.origin == g.origin and back.spacing == g.spacing


def test_upper_transform_pads_automatically():
    spec = GridSpec.from_bounds([-1.0], [1.0], [0.01])
    f = ScalarGrid.from_function(lambda x: np.abs(x[..., 0]), spec)
    u = upper_transform(f, 10.0)
    assert u.dims == f.dims
    # near the boundary the extension keeps |x| convex, so no spurious valley appears
    assert u.values[0] == pytest.approx(1.0, abs=1e-12)
    assert math.isclose(u.value_at([0.0]), 0.025, abs_tol=1e-12)
