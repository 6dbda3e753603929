import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccx.envelope import convex_envelope_1d
from ccx.grid import GridError, GridSpec, ScalarGrid, estimate_lipschitz
from ccx.oracle import Abs, Affine, OracleError, Relu, Scale, Square, SqDistToPoints, Sublinear, sample
from ccx.singularity import (SweepReport, dc_edge_bound, geometric_schedule, gradient_field,
                             gradient_lipschitz_check, gradient_lower, gradient_upper, landscape_sweep,
                             probe_window, scale1_map, singular_map)
from ccx.transforms import tolerance

from conftest import random_lipschitz_grid


def _line(tf, h=0.001, lo=-1.0, hi=1.0):
    return sample(tf, GridSpec.from_bounds([lo], [hi], [h]))


def test_valley_abs_examples():
    f = _line(Abs())
    v = singular_map(f, 10.0, "valley")
    assert v.value_at([0.0]) == pytest.approx(0.025, abs=1e-12)
    assert v.value_at([0.025]) == pytest.approx(0.00625, abs=1e-12)
    assert scale1_map(f, 10.0, "valley").value_at([0.0]) == pytest.approx(0.25, abs=1e-12)


def test_ridge_of_convex_is_zero():
    f = _line(Abs())
    assert np.abs(singular_map(f, 7.0, "ridge").values).max() <= 1e-12


def test_affine_maps_vanish():
    spec = GridSpec.from_bounds([-1, -1], [1, 1], [0.05, 0.05])
    f = sample(Affine([0.7, -0.2], 0.3), spec)
    for kind in ("ridge", "valley", "edge"):
        assert np.abs(scale1_map(f, 5.0, kind).values).max() <= 1e-12


def test_unknown_kind():
    with pytest.raises(GridError):
        singular_map(_line(Abs()), 1.0, "crater")


@pytest.mark.parametrize("seed", range(10))
def test_maps_nonnegative_and_bounded(seed):
    f = random_lipschitz_grid(seed)
    lam = 6.0
    L = estimate_lipschitz(f).L
    tol = tolerance(f, lam, L)
    e = singular_map(f, lam, "edge").values
    for kind in ("ridge", "valley", "edge"):
        assert singular_map(f, lam, kind).values.min() >= -1e-12
    assert e.max() <= L * L / (2 * lam) + 2 * tol


def test_valley_even_gradient_odd():
    f = _line(Abs(), h=0.01)
    v = singular_map(f, 10.0, "valley").values
    np.testing.assert_allclose(v, v[::-1], atol=1e-12)
    g = gradient_upper(f, 10.0)[0].values
    np.testing.assert_allclose(g, -g[::-1], atol=1e-9)


def test_geometric_schedule():
    assert geometric_schedule(4, 2, 256) == [4, 8, 16, 32, 64, 128, 256]
    assert geometric_schedule(1, 10, 50) == [1, 10]
    with pytest.raises(GridError):
        geometric_schedule(4, 1, 8)


def test_sweep_abs_default_schedule():
    rep = landscape_sweep(Abs(), [[0.0]], geometric_schedule(4, 2, 256), "valley")[0]
    assert rep.converged and rep.limit_estimate == pytest.approx(0.25, abs=1e-9)
    assert all(lam * h <= 0.1 for lam, h in zip(rep.lambdas, rep.spacing_used))
    assert rep.warnings == []


def test_sweep_relu_limit_and_brute_force():
    rep = landscape_sweep(Relu(), [[0.0]], geometric_schedule(4, 2, 256), "valley")[0]
    assert rep.limit_estimate == pytest.approx(0.0625, rel=0.02)
    # independent value at lam=4 from the 1D hull of lam x^2 - f on a fine grid
    lam, h = 4.0, 1e-4
    x = np.arange(-2.0, 2.0 + h / 2, h)
    hull = convex_envelope_1d(x, lam * x ** 2 - np.maximum(x, 0))
    upper = lam * x ** 2 - hull(x)
    brute = lam * (upper[len(x) // 2] - 0.0)
    assert rep.values[0] == pytest.approx(brute, abs=2e-3)


def test_sweep_smooth_goes_to_zero():
    rep = landscape_sweep(Square(), [[0.3]], [4, 16, 64, 256], "edge")[0]
    assert rep.values[-1] <= 1e-6
    assert all(b <= a + 1e-12 for a, b in zip(rep.values, rep.values[1:]))


def test_sweep_resolution_warning_on_fixed_grid():
    f = _line(Abs(), h=0.01)
    rep = landscape_sweep(f, [[0.0]], [4, 8, 16], "valley")[0]
    assert len(rep.warnings) == 1 and "16" in rep.warnings[0]


def test_sweep_callable_source_and_extrapolation():
    def family(lam):
        return probe_window(Relu(), [0.0], lam, 0.025)

    rep = landscape_sweep(family, [[0.0]], [32, 64], "valley", extrapolate=True)[0]
    assert rep.extrapolated
    l1, l2 = rep.lambdas
    assert rep.limit_estimate == pytest.approx((l2 * rep.values[1] - l1 * rep.values[0]) / (l2 - l1))


def test_sweep_validation():
    with pytest.raises(GridError):
        landscape_sweep(Abs(), [[0.0]], [8, 4], "valley")
    with pytest.raises(GridError):
        landscape_sweep(Abs(), [[0.0]], [4, 8], "valley", resolution=0.5)


def test_sweep_report_json():
    rep = landscape_sweep(Abs(), [[0.0]], [4, 8], "valley")[0]
    obj = json.loads(rep.dumps())
    assert set(obj) >= {"probe", "lambdas", "values", "limit_estimate", "converged", "warnings", "spacing_used"}
    assert isinstance(rep, SweepReport)


def test_sublinear_square_sweep():
    S = [[1, 1], [1, -1], [-1, 1], [-1, -1]]
    rep = landscape_sweep(Sublinear(S), [[0.0, 0.0]], [16, 32, 64], "valley")[0]
    assert rep.limit_estimate == pytest.approx(0.5, rel=0.02)


def test_ridge_of_superdifferential_oracle():
    K = [[-1.0, 0.0], [1.0, 0.0]]
    rep = landscape_sweep(SqDistToPoints(K), [[0.0, 0.5]], [16, 32], "ridge")[0]
    # superdifferential {(2, 1), (-2, 1)}: radius 2, limit 1, reached as lam / (1 + lam)
    for lam, v in zip(rep.lambdas, rep.values):
        assert v == pytest.approx(lam / (1 + lam), abs=1e-3)


def test_gradient_examples():
    f = _line(Abs(), h=1e-4, lo=-0.2, hi=0.2)
    assert abs(gradient_upper(f, 100.0).at([0.0])[0]) <= 0.02
    g = sample(Relu(), GridSpec.centered([0.0], 300, 0.1 / 128))
    assert gradient_upper(g, 128.0).at([0.0])[0] == pytest.approx(0.5, abs=0.02)
    spec = GridSpec.from_bounds([-1, -1], [1, 1], [0.1, 0.1])
    a = sample(Affine([0.3, -1.2]), spec)
    for field in (gradient_upper(a, 4.0), gradient_lower(a, 4.0)):
        np.testing.assert_allclose(field[0].values, 0.3, atol=1e-9)
        np.testing.assert_allclose(field[1].values, -1.2, atol=1e-9)


def test_gradient_field_flags_and_size():
    u = ScalarGrid(np.arange(12.0).reshape(3, 4), (0, 0), (1, 1))
    field = gradient_field(u)
    assert field.one_sided[0, 1] and field.one_sided[1, 0] and not field.one_sided[1, 1]
    with pytest.raises(GridError):
        gradient_field(ScalarGrid(np.zeros((2, 5)), (0, 0), (1, 1)))


@pytest.mark.parametrize("lam", [10.0, 100.0])
def test_gradient_lipschitz_abs(lam):
    rep = gradient_lipschitz_check(_line(Abs()), lam)
    assert rep.passed and rep.max_ratio == pytest.approx(2 * lam, rel=1e-6)


def test_gradient_lipschitz_affine_and_sublinear():
    spec = GridSpec.from_bounds([-1, -1], [1, 1], [0.02, 0.02])
    assert gradient_lipschitz_check(sample(Affine([1.0, 2.0]), spec), 5.0).max_ratio <= 1e-8
    S = [[1, 1], [1, -1], [-1, 1], [-1, -1]]
    assert gradient_lipschitz_check(sample(Sublinear(S), spec), 5.0).passed


def test_dc_worked_examples():
    lams = [8, 16, 32, 64]
    rep = dc_edge_bound(Abs(), Abs(), [0.0], lams)
    assert rep.holds and rep.bound == 0.0 and max(rep.values) <= 1e-12
    rep = dc_edge_bound(Sublinear([[1, 0], [-1, 0]]), Sublinear([[0, 1], [0, -1]]), [0.0, 0.0], lams)
    assert rep.holds and rep.bound == pytest.approx(0.0) and rep.tail_min == pytest.approx(0.5, rel=0.05)
    rep = dc_edge_bound(Scale(2.0, Abs()), Abs(), [0.0], lams)
    assert rep.holds and rep.bound == pytest.approx(0.25) and rep.tail_min == pytest.approx(0.25, abs=0.01)


def test_dc_rejects_nonconvex():
    with pytest.raises(OracleError):
        dc_edge_bound(Abs(), SqDistToPoints([[0.0]]), [0.5], [4, 8])


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.8, 0.8), st.floats(2.0, 40.0))
def test_valley_abs_closed_form_property(c, lam):
    h = 1e-3
    f = sample(Abs(), GridSpec.from_bounds([-1], [1], [h]))
    x = np.round(c / h) * h
    v = singular_map(f, lam, "valley").value_at([x])
    expected = lam * (abs(x) - 1 / (2 * lam)) ** 2 if abs(x) <= 1 / (2 * lam) else 0.0
    assert v == pytest.approx(expected, abs=tolerance(f, lam))
