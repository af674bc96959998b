"""Tests for the C1 isogeometric space over AS-G1 geometries."""
import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from asg1.c1space import DiscreteField, build_c1_space, constraint_residual, eval_c1, verify_c1
from asg1.errors import InvalidArgumentError, NotAnalysisSuitableError
from asg1.gluing import estimate_gluing
from asg1.samples import corner_domain
from asg1.splinecore import SplineSpace1D, prolongation


@pytest.fixture(scope="module")
def planar_space(planar_asg1):
    return build_c1_space(planar_asg1)


class TestBasis:
    def test_single_patch_without_boundary_is_the_tensor_space(self, single_square):
        space = build_c1_space(single_square, restrict_boundary=False)
        n = single_square.space.n
        assert space.dim == n * n
        assert space.num_boundary == 0
        assert space.num_interior == space.dim

    def test_columns_are_c1(self, planar_space):
        jumps = verify_c1(planar_space)
        assert jumps['value_jump'] <= 1e-9
        assert jumps['relative_gradient_jump'] <= 1e-7

    def test_random_combination_is_c1(self, planar_space, rng):
        coeffs = rng.standard_normal((planar_space.dim, 2))
        jumps = verify_c1(planar_space, samples=17, coeffs=coeffs)
        assert jumps['value_jump'] <= 1e-8
        assert jumps['relative_gradient_jump'] <= 1e-7

    def test_valency_three(self):
        geometry = corner_domain(SplineSpace1D(4, 1, 2))
        space = build_c1_space(geometry)
        assert space.dim > 0
        jumps = verify_c1(space)
        assert jumps['value_jump'] <= 1e-9
        assert jumps['relative_gradient_jump'] <= 1e-7

    def test_dimension_grows_under_refinement(self, planar_asg1, planar_space):
        fine = build_c1_space(planar_asg1.refined(1))
        assert fine.dim > planar_space.dim
        assert fine.space.k == 5

    def test_dimension_is_invariant_under_rigid_motion(self, planar_asg1, planar_space):
        R = Rotation.from_euler('xyz', [0.6, -0.4, 1.2]).as_matrix()
        moved = planar_asg1.transformed(R, (2.0, -1.0, 0.5))
        assert not moved.is_planar()
        space = build_c1_space(moved)
        assert space.dim == planar_space.dim
        assert space.num_boundary == planar_space.num_boundary

    def test_coarse_functions_embed_in_the_fine_space(self, planar_asg1, planar_space, rng):
        fine = build_c1_space(planar_asg1.refined(1))
        P = prolongation(planar_space.space, fine.space)
        coarse = planar_space.patch_coeffs(rng.standard_normal(planar_space.dim))
        assert constraint_residual(fine, np.einsum('ai,pij,bj->pab', P, coarse, P)) <= 1e-8


class TestMembership:
    def test_coordinate_functions_are_in_the_space(self, planar_asg1, planar_space):
        for axis in (0, 1):
            coeffs = np.stack([p.coeffs[..., axis] for p in planar_asg1.patches])
            assert constraint_residual(planar_space, coeffs) <= 1e-9

    def test_constant_is_in_the_space(self, planar_asg1, planar_space):
        n = planar_asg1.space.n
        assert constraint_residual(planar_space, np.ones((planar_asg1.num_patches, n, n))) <= 1e-9

    def test_patchwise_noise_is_not(self, planar_asg1, planar_space, rng):
        n = planar_asg1.space.n
        noise = rng.standard_normal((planar_asg1.num_patches, n, n))
        assert constraint_residual(planar_space, noise) > 1e-3


class TestBoundaryOrdering:
    def test_interior_columns_have_zero_boundary_data(self, planar_space):
        assert 0 < planar_space.num_boundary < planar_space.dim
        rows = planar_space.boundary_rows()
        block = planar_space.aux[np.ix_(rows, np.arange(planar_space.num_interior))]
        scale = max(1.0, float(np.abs(planar_space.aux).max()))
        assert float(np.abs(block).max(initial=0.0)) <= 1e-8 * scale

    def test_boundary_columns_are_independent_on_the_boundary(self, planar_space):
        rows = planar_space.boundary_rows()
        block = planar_space.aux[np.ix_(rows, np.arange(planar_space.num_interior, planar_space.dim))]
        assert np.linalg.matrix_rank(block) == planar_space.num_boundary


class TestRefusal:
    def test_non_asg1_geometry(self, perturbed):
        with pytest.raises(NotAnalysisSuitableError) as info:
            build_c1_space(perturbed)
        assert info.value.exit_code == 5

    def test_negated_beta(self, planar_asg1):
        wrong = estimate_gluing(planar_asg1.source(), planar_asg1.topology).negated_beta()
        with pytest.raises(NotAnalysisSuitableError):
            build_c1_space(planar_asg1, wrong)


class TestFields:
    def test_field_size_is_checked(self, planar_space):
        with pytest.raises(InvalidArgumentError):
            DiscreteField(planar_space, np.zeros(planar_space.dim + 1))

    def test_eval_matches_patch_coefficients(self, planar_space, rng):
        field = DiscreteField(planar_space, rng.standard_normal(planar_space.dim))
        coeffs = field.patch_coeffs()
        assert coeffs.shape == (planar_space.geometry.num_patches, planar_space.space.n, planar_space.space.n)
        values = eval_c1(planar_space, field, 0, [0.0], [0.0])
        assert values.shape == (1, 1)
        assert values[0, 0] == pytest.approx(coeffs[0, 0, 0], abs=1e-12)

    def test_eval_rejects_bad_requests(self, planar_space):
        field = DiscreteField(planar_space, np.zeros(planar_space.dim))
        with pytest.raises(InvalidArgumentError):
            eval_c1(planar_space, field, 99, [0.5], [0.5])
        with pytest.raises(InvalidArgumentError):
            eval_c1(planar_space, field, 0, [0.5], [0.5], derivs=((3, 0),))
