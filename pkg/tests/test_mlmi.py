import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehltvd.grid import Field, GridLevel
from ehltvd.kernel import build_kernel_table, deformation_direct
from ehltvd.mlmi import (MlmiPlan, adjoint_interpolate, coarsen_density, inject_kernel,
                         interpolate, midpoint_weights, mlmi_deformation)


def test_midpoint_weights():
    w = midpoint_weights(6)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(w, np.array([3, -25, 150, 150, -25, 3]) / 256)
    with pytest.raises(ValueError):
        midpoint_weights(5)


def test_coarsen_constant():
    c = coarsen_density(np.ones((33, 33)))
    assert np.allclose(c[3:-3, 3:-3], 1.0)


def test_coarsen_delta_is_weight_column():
    u = np.zeros((17, 17))
    u[8, 9] = 1.0  # odd column: spreads over six coarse columns
    c = 4 * coarsen_density(u)
    w = midpoint_weights(6)
    assert np.allclose(c[4, 2:8], w)
    assert np.count_nonzero(c) == 6


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_moments_preserved(seed):
    rng = np.random.default_rng(seed)
    n, h = 17, 0.25
    u = rng.random((n, n))
    c = coarsen_density(u, extend=True)
    x = h * np.arange(n)
    X = 2 * h * (np.arange(c.shape[0]) - 2)
    for px, py in ((0, 0), (1, 0), (3, 2), (5, 0), (2, 3)):
        fine = h * h * np.einsum("ij,i,j->", u, x ** px, x ** py)
        coarse = 4 * h * h * np.einsum("ij,i,j->", c, X ** px, X ** py)
        assert coarse == pytest.approx(fine, rel=1e-11)


def test_adjoint_identity():
    rng = np.random.default_rng(3)
    vc, vf = rng.random((9, 9)), rng.random((17, 17))
    assert np.sum(interpolate(vc) * vf) == pytest.approx(np.sum(vc * adjoint_interpolate(vf)))


def test_inject_kernel():
    t = build_kernel_table(GridLevel(17, 17))
    c = inject_kernel(t)
    assert c.g.shape == (9, 9)
    assert np.array_equal(c.g, t.g[::2, ::2])
    assert np.array_equal(inject_kernel(c).g, t.g[::4, ::4])


def test_zero_density():
    lv = GridLevel(65, 65, -2.5, -2.5, 2.5, 2.5)
    plan = MlmiPlan.build(lv, 6, 4)
    assert not mlmi_deformation(np.zeros(lv.shape), plan).any()


def test_even_alignment_corrections_vanish():
    plan = MlmiPlan.build(GridLevel(129, 129, -2.5, -2.5, 2.5, 2.5), 6, 4)
    for C in plan.corrections:
        assert not C[0, 0].any()
        assert C[1, 1].any()


def test_plan_validation():
    lv = GridLevel(65, 65, -2.5, -2.5, 2.5, 2.5)
    with pytest.raises(ValueError):
        MlmiPlan.build(lv, 5, 4)
    with pytest.raises(ValueError):
        MlmiPlan.build(lv, 6, 2)
    with pytest.raises(ValueError):
        mlmi_deformation(np.zeros((33, 33)), MlmiPlan.build(lv, 6, 4))


@pytest.fixture(scope="module")
def grid65():
    lv = GridLevel(65, 65, -2.5, -2.5, 2.5, 2.5)
    return lv, build_kernel_table(lv)


def _rel(a, b):
    return np.abs(a - b).max() / np.abs(b).max()


def test_random_density_accuracy_m10(grid65):
    lv, t = grid65
    u = np.random.default_rng(0).random(lv.shape)
    ref = deformation_direct(u, t)
    assert _rel(mlmi_deformation(u, MlmiPlan.build(lv, 6, 10)), ref) <= 1e-5


def test_smooth_density_accuracy(grid65):
    lv, t = grid65
    X, Y = lv.mesh()
    u = np.exp(-4 * (X ** 2 + Y ** 2))
    ref = deformation_direct(u, t)
    err6 = _rel(mlmi_deformation(u, MlmiPlan.build(lv, 6, 10)), ref)
    err4 = _rel(mlmi_deformation(u, MlmiPlan.build(lv, 4, 10)), ref)
    assert err6 <= 1e-5
    assert err4 >= err6


def test_error_falls_with_window(grid65):
    lv, t = grid65
    u = np.random.default_rng(9).random(lv.shape)
    ref = deformation_direct(u, t)
    errs = [_rel(mlmi_deformation(u, MlmiPlan.build(lv, 6, m)), ref) for m in (4, 6, 8, 10, 12)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_linearity(grid65):
    lv, _ = grid65
    plan = MlmiPlan.build(lv, 6, 4)
    rng = np.random.default_rng(5)
    u, v = rng.random(lv.shape), rng.random(lv.shape)
    lhs = mlmi_deformation(2 * u - v, plan)
    rhs = 2 * mlmi_deformation(u, plan) - mlmi_deformation(v, plan)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_field_in_field_out(grid65):
    lv, _ = grid65
    out = mlmi_deformation(Field(lv), MlmiPlan.build(lv, 6, 4))
    assert isinstance(out, Field) and out.level == lv
