import numpy as np
import pytest

from asg1.errors import DomainError, InvalidArgumentError
from asg1.splinecore import (SplinePatch, SplineSpace1D, companion_spaces, eval_basis, eval_function, eval_patch,
                             gram_1d, greville, interpolate_patch, is_nested, l2_project, l2_project_patch,
                             prolongation, refine_dyadic, refine_patch)


@pytest.mark.parametrize("p,r,k,n", [(3, 1, 2, 8), (4, 1, 2, 11), (5, 1, 2, 14), (4, 2, 0, 5), (1, 0, 3, 5)])
def test_dimension_formula(p, r, k, n):
    space = SplineSpace1D(p, r, k)
    assert space.n == n
    assert space.knots.size == n + p + 1


def test_companion_dimensions():
    trace, transversal = companion_spaces(SplineSpace1D(4, 1, 2))
    assert (trace.p, trace.r, trace.n) == (4, 2, 9)
    assert (transversal.p, transversal.r, transversal.n) == (3, 1, 8)


def test_companion_needs_room_for_trace_regularity():
    with pytest.raises(InvalidArgumentError):
        companion_spaces(SplineSpace1D(3, 2, 2))


@pytest.mark.parametrize("args", [(0, 0, 1), (3, 3, 1), (3, -1, 1), (3, 1, -1)])
def test_invalid_spaces(args):
    with pytest.raises(InvalidArgumentError):
        SplineSpace1D(*args)


def test_partition_of_unity_and_derivative_sum():
    space = SplineSpace1D(4, 1, 3)
    xi = np.linspace(0.0, 1.0, 57)
    table = eval_basis(space, xi, 2)
    np.testing.assert_allclose(table[0].sum(axis=1), 1.0, atol=1e-13)
    np.testing.assert_allclose(table[1].sum(axis=1), 0.0, atol=1e-10)
    assert np.all(table[0] >= -1e-15)


def test_right_end_uses_left_limit():
    space = SplineSpace1D(3, 1, 2)
    table = eval_basis(space, [1.0])[0]
    np.testing.assert_allclose(table[0], np.eye(space.n)[-1], atol=1e-14)


def test_domain_is_checked():
    with pytest.raises(DomainError):
        eval_basis(SplineSpace1D(3, 1, 1), [1.1])


def test_greville_reproduces_identity():
    space = SplineSpace1D(4, 1, 2)
    xi = np.linspace(0.0, 1.0, 21)
    np.testing.assert_allclose(eval_function(space, greville(space), xi), xi, atol=1e-13)


def test_interpolate_patch_reproduces_polynomial_and_derivatives():
    space = SplineSpace1D(3, 1, 2)
    coeffs = interpolate_patch(space, lambda u, v: np.outer(u ** 3, 1 + v) + np.outer(u, v ** 2))
    patch = SplinePatch(space, coeffs)
    u, v = np.array([0.1, 0.55, 1.0]), np.array([0.3, 0.9, 0.0])
    val, du, dv, duv = eval_patch(patch, u, v, [(0, 0), (1, 0), (0, 1), (1, 1)])[..., 0]
    np.testing.assert_allclose(val, u ** 3 * (1 + v) + u * v ** 2, atol=1e-12)
    np.testing.assert_allclose(du, 3 * u ** 2 * (1 + v) + v ** 2, atol=1e-11)
    np.testing.assert_allclose(dv, u ** 3 + 2 * u * v, atol=1e-11)
    np.testing.assert_allclose(duv, 3 * u ** 2 + 2 * v, atol=1e-10)


def test_gram_matrix_is_symmetric_and_integrates_constants():
    space = SplineSpace1D(4, 1, 2)
    M = gram_1d(space)
    np.testing.assert_allclose(M, M.T, atol=1e-15)
    assert M.sum() == pytest.approx(1.0, rel=1e-13)
    K = gram_1d(space, 1, 1)
    np.testing.assert_allclose(K @ np.ones(space.n), 0.0, atol=1e-11)


def test_l2_projection_reproduces_space_members():
    space = SplineSpace1D(4, 2, 3)
    c = np.linspace(-1.0, 2.0, space.n) ** 2
    projected = l2_project(space, lambda t: eval_function(space, c, t))
    np.testing.assert_allclose(projected, c, atol=1e-11)


def test_l2_project_patch_of_bilinear_function():
    space = SplineSpace1D(3, 1, 1)
    coeffs = l2_project_patch(space, lambda u, v: np.outer(1 + u, 2 - v))
    value = eval_patch(SplinePatch(space, coeffs), [0.25], [0.75])[0, 0, 0]
    assert value == pytest.approx(1.25 * 1.25, rel=1e-12)


def test_dyadic_refinement_nesting():
    space = SplineSpace1D(4, 1, 2)
    fine = refine_dyadic(space, 2)
    assert fine.k == 11
    assert is_nested(space, fine)
    assert not is_nested(space, SplineSpace1D(4, 1, 4))
    assert not is_nested(space, SplineSpace1D(3, 1, 5))
    assert set(np.round(space.breaks, 12)) <= set(np.round(fine.breaks, 12))


def test_prolongation_preserves_spline(rng):
    coarse = SplineSpace1D(4, 1, 2)
    fine = refine_dyadic(coarse, 1)
    c = rng.standard_normal(coarse.n)
    xi = np.linspace(0.0, 1.0, 41)
    P = prolongation(coarse, fine)
    np.testing.assert_allclose(eval_function(fine, P @ c, xi), eval_function(coarse, c, xi), atol=1e-12)


def test_prolongation_rejects_non_nested():
    with pytest.raises(InvalidArgumentError):
        prolongation(SplineSpace1D(3, 1, 2), SplineSpace1D(3, 1, 4))


def test_refine_patch_is_exact(rng):
    space = SplineSpace1D(3, 1, 1)
    patch = SplinePatch(space, rng.standard_normal((space.n, space.n, 3)))
    fine = refine_patch(patch, 2)
    u, v = rng.random(15), rng.random(15)
    for order in [(0, 0), (1, 0), (1, 1), (0, 2)]:
        np.testing.assert_allclose(eval_patch(fine, u, v, [order]), eval_patch(patch, u, v, [order]), atol=1e-9)
