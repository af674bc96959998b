"""Tests for the biharmonic solvers, error norms and the convergence ledger."""
import numpy as np
import pytest

from asg1.c1space import DiscreteField, build_c1_space
from asg1.errors import InvalidArgumentError, ProblemMismatchError
from asg1.iga import (DIRICHLET, MANUFACTURED, REACTION, ConvergenceLedger, ManufacturedSolution, ProblemSpec,
                      assemble, convergence_study, error_norms, estimators_h_h2, impose_dirichlet, solve,
                      surface_metrics)
from asg1.samples import fitted_cube_sphere


def _zeros(x):
    return np.zeros(len(x))


LINEAR = ManufacturedSolution(
    'linear', source=_zeros, value=lambda x: x[:, 0] - 2.0 * x[:, 1],
    gradient=lambda x: np.tile([1.0, -2.0, 0.0], (len(x), 1)),
    hessian=lambda x: np.zeros((len(x), 3, 3)))


@pytest.fixture(scope="module")
def planar_space(planar_asg1):
    return build_c1_space(planar_asg1)


@pytest.fixture(scope="module")
def sphere():
    return fitted_cube_sphere(4, 1, 1)


class TestMetrics:
    def test_unit_square(self, single_square):
        xi = np.linspace(0.0, 1.0, 5)
        m = surface_metrics(single_square, 0, xi, xi[::-1])
        np.testing.assert_allclose(m.metric, np.broadcast_to(np.eye(2), (5, 2, 2)), atol=1e-12)
        np.testing.assert_allclose(m.inverse, np.broadcast_to(np.eye(2), (5, 2, 2)), atol=1e-12)
        np.testing.assert_allclose(m.area, 1.0, atol=1e-12)
        np.testing.assert_allclose(m.normal, np.tile([0.0, 0.0, 1.0], (5, 1)), atol=1e-12)

    def test_scaling_and_rotation(self, single_square):
        R = np.array([[0.0, 0.0, 2.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
        m = surface_metrics(single_square.transformed(R), 0, [0.3], [0.6])
        np.testing.assert_allclose(m.metric[0], 4.0 * np.eye(2), atol=1e-12)
        np.testing.assert_allclose(m.area, [4.0], atol=1e-12)
        np.testing.assert_allclose(m.normal[0], [1.0, 0.0, 0.0], atol=1e-12)


class TestProblemSpec:
    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError):
            ProblemSpec('neumann', _zeros)

    def test_reaction_must_be_positive(self):
        with pytest.raises(InvalidArgumentError):
            ProblemSpec.reaction_problem(MANUFACTURED['cos-half-product'], 0.0)

    def test_dirichlet_needs_an_exact_solution(self):
        with pytest.raises(InvalidArgumentError):
            ProblemSpec.dirichlet(MANUFACTURED['cos-half-product'])

    def test_reaction_on_planar_domain_is_a_mismatch(self, planar_asg1):
        problem = ProblemSpec.reaction_problem(MANUFACTURED['cos-half-product'])
        with pytest.raises(ProblemMismatchError) as info:
            problem.validate(planar_asg1)
        assert info.value.exit_code == 6

    def test_manufactured_source_is_the_bilaplacian(self):
        x = np.array([[0.1, 0.2, 0.0], [0.7, -0.4, 0.0]])
        sol = MANUFACTURED['cos4sin4']
        np.testing.assert_allclose(sol.source(x), 1024.0 * sol.value(x))
        hess = sol.hessian(x)
        np.testing.assert_allclose(hess[:, 0, 0] + hess[:, 1, 1], -32.0 * sol.value(x))


class TestAssembly:
    def test_matrix_is_symmetric(self, planar_space):
        system = assemble(ProblemSpec.dirichlet(MANUFACTURED['cos4sin4']), planar_space)
        diff = system.matrix - system.matrix.T
        assert abs(diff).max() <= 1e-12 * abs(system.matrix).max()
        assert system.matrix.shape == (planar_space.dim, planar_space.dim)
        assert system.rhs.shape == (planar_space.dim,)

    def test_coordinate_functions_are_biharmonic(self, planar_asg1, planar_space):
        system = assemble(ProblemSpec.dirichlet(LINEAR), planar_space)
        K = system.stiffness
        scale = abs(K).max()
        for axis in (0, 1):
            phi = np.concatenate([p.coeffs[..., axis].ravel() for p in planar_asg1.patches])
            assert np.abs(K @ phi).max() <= 1e-8 * scale * np.abs(phi).max()

    def test_mass_matrix_integrates_area(self, planar_asg1, planar_space):
        system = assemble(ProblemSpec.dirichlet(LINEAR), planar_space)
        ones = np.ones(system.mass.shape[0])
        # the 2x2 grid covers [0, 2]^2
        assert ones @ (system.mass @ ones) == pytest.approx(4.0, rel=1e-10)


class TestDirichlet:
    def test_linear_solution_is_reproduced(self, planar_space):
        u = solve(ProblemSpec.dirichlet(LINEAR), planar_space)
        e_l2, e_h1, e_h2 = error_norms(u, LINEAR)
        assert e_l2 <= 1e-8
        assert e_h1 <= 1e-7
        assert e_h2 <= 1e-6

    def test_zero_data_gives_zero(self, planar_space):
        problem = ProblemSpec(DIRICHLET, _zeros, g1=_zeros, g2=lambda x, normal: np.zeros(len(x)))
        u = solve(problem, planar_space)
        assert np.abs(u.coeffs).max() <= 1e-12

    def test_boundary_data_fit(self, planar_space):
        coeffs, residual = impose_dirichlet(planar_space, ProblemSpec.dirichlet(LINEAR))
        assert coeffs.shape == (planar_space.num_boundary,)
        assert residual <= 1e-9

    def test_space_without_boundary_functionals(self, planar_asg1):
        space = build_c1_space(planar_asg1, restrict_boundary=False)
        with pytest.raises(ProblemMismatchError):
            impose_dirichlet(space, ProblemSpec.dirichlet(LINEAR))


class TestEstimators:
    def test_same_field_has_zero_estimate(self, planar_space, rng):
        u = DiscreteField(planar_space, rng.standard_normal(planar_space.dim))
        assert estimators_h_h2(u, u) == pytest.approx((0.0, 0.0, 0.0), abs=1e-10)

    def test_non_nested_spaces(self, planar_space, single_square):
        u = DiscreteField(planar_space, np.zeros(planar_space.dim))
        other = build_c1_space(single_square, restrict_boundary=False)
        v = DiscreteField(other, np.zeros(other.dim))
        with pytest.raises(InvalidArgumentError):
            estimators_h_h2(u, v)


class TestLedger:
    def test_orders(self):
        rows = [{'level': 0, 'h': 0.5, 'dim': 10, 'eL2': 1.0, 'eH1': 2.0, 'eH2': 4.0},
                {'level': 1, 'h': 0.25, 'dim': 40, 'eL2': 1.0 / 32, 'eH1': 2.0 / 16, 'eH2': 4.0 / 8}]
        ledger = ConvergenceLedger.from_rows(rows, 'error')
        assert np.isnan(ledger.frame.loc[0, 'oL2'])
        assert ledger.final_orders() == pytest.approx((5.0, 4.0, 3.0))
        assert list(ledger.frame.columns[:len(ConvergenceLedger.COLUMNS)]) == list(ConvergenceLedger.COLUMNS)

    def test_single_level_has_no_orders(self, planar_asg1):
        ledger = convergence_study(ProblemSpec.dirichlet(LINEAR), planar_asg1, levels=1)
        assert len(ledger.frame) == 1
        assert all(np.isnan(o) for o in ledger.final_orders())
        assert ledger.measure == 'error'
        assert ledger.frame.loc[0, 'eL2'] <= 1e-8

    def test_levels_must_be_positive(self, planar_asg1):
        with pytest.raises(InvalidArgumentError):
            convergence_study(ProblemSpec.dirichlet(LINEAR), planar_asg1, levels=0)


@pytest.mark.slow
class TestConvergence:
    def test_dirichlet_rates(self, planar_asg1):
        ledger = convergence_study(ProblemSpec.dirichlet(MANUFACTURED['cos4sin4']), planar_asg1, levels=3)
        frame = ledger.frame
        assert list(frame['k']) == [2, 5, 11]
        for column in ('eL2', 'eH1', 'eH2'):
            assert frame[column].is_monotonic_decreasing
        o_l2, o_h1, o_h2 = ledger.final_orders()
        assert o_h2 > 1.5
        assert o_h1 > o_h2 - 0.5
        assert frame['sL2'].iloc[:2].notna().all()


@pytest.mark.slow
class TestSphere:
    def test_closed_surface(self, sphere):
        assert not sphere.topology.boundary
        assert sphere.num_patches == 6

    def test_dirichlet_on_closed_surface_is_a_mismatch(self, sphere):
        with pytest.raises(ProblemMismatchError):
            ProblemSpec.dirichlet(LINEAR).validate(sphere)

    def test_constant_solution(self, sphere):
        constant = ManufacturedSolution(
            'constant', source=lambda x: np.ones(len(x)), value=lambda x: np.full(len(x), 0.5),
            gradient=lambda x: np.zeros((len(x), 3)), hessian=lambda x: np.zeros((len(x), 3, 3)))
        problem = ProblemSpec.reaction_problem(constant, reaction=2.0)
        assert problem.kind == REACTION
        u = solve(problem, build_c1_space(sphere))
        e_l2, e_h1, e_h2 = error_norms(u, constant)
        assert e_l2 <= 1e-8
        assert e_h1 <= 1e-7

    def test_estimator_ledger(self, sphere):
        ledger = convergence_study(ProblemSpec.reaction_problem(MANUFACTURED['cos-half-product']), sphere, levels=3)
        assert ledger.measure == 'estimator'
        assert len(ledger.frame) == 2
        assert ledger.frame['eL2'].iloc[0] > ledger.frame['eL2'].iloc[1]
        assert any('reaction coefficient' in note for note in ledger.notes)
