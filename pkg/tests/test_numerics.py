import numpy as np
import pytest

from asg1.errors import DegenerateSystemError, InfeasibleConstraintsError, InvalidArgumentError
from asg1.numerics import QuadraticProgram, composite_gauss, gauss_legendre, lsq_min_norm, null_space, solve_saddle


def _spd(rng, n):
    M = rng.standard_normal((n, n))
    return M @ M.T + n * np.eye(n)


@pytest.mark.parametrize("q", [1, 2, 3, 5, 8])
def test_gauss_legendre_exact_through_degree_2q_minus_1(q):
    rule = gauss_legendre(q)
    for d in range(2 * q):
        assert rule.integrate(rule.nodes ** d) == pytest.approx(1.0 / (d + 1), rel=1e-13)


def test_gauss_legendre_not_exact_at_degree_2q():
    rule = gauss_legendre(2)
    assert abs(rule.integrate(rule.nodes ** 4) - 0.2) > 1e-4


def test_gauss_legendre_maps_interval():
    rule = gauss_legendre(3, (1.0, 3.0))
    assert rule.weights.sum() == pytest.approx(2.0)
    assert np.all((rule.nodes > 1.0) & (rule.nodes < 3.0))


def test_gauss_legendre_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        gauss_legendre(0)
    with pytest.raises(InvalidArgumentError):
        gauss_legendre(2, (1.0, 1.0))


def test_composite_gauss_integrates_piecewise_polynomial():
    rule = composite_gauss([0.0, 0.5, 1.0], 2)
    values = np.where(rule.nodes < 0.5, rule.nodes ** 3, 1.0 - rule.nodes)
    assert rule.integrate(values) == pytest.approx(0.5 ** 4 / 4 + 0.125, rel=1e-13)


def test_null_space_orthonormal_and_annihilated(rng):
    A = rng.standard_normal((3, 7))
    A = np.vstack([A, A[0] + A[1]])
    Z, rank = null_space(A)
    assert rank == 3
    assert Z.shape == (7, 4)
    np.testing.assert_allclose(Z.T @ Z, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(A @ Z, 0.0, atol=1e-12)


def test_null_space_without_rows():
    Z, rank = null_space(np.zeros((0, 3)))
    assert rank == 0
    np.testing.assert_array_equal(Z, np.eye(3))


def test_saddle_matches_kkt_oracle_randomized(rng):
    for _ in range(100):
        n = int(rng.integers(2, 9))
        m = int(rng.integers(0, n))
        H = _spd(rng, n)
        c = rng.standard_normal(n)
        A = rng.standard_normal((m, n))
        b = rng.standard_normal(m)
        x, mult = solve_saddle(QuadraticProgram(H, c, A, b))
        K = np.block([[H, A.T], [A, np.zeros((m, m))]])
        ref = np.linalg.solve(K, np.concatenate([-c, b]))
        scale = 1.0 + np.abs(ref).max()
        np.testing.assert_allclose(x, ref[:n], atol=1e-10 * scale)
        np.testing.assert_allclose(mult, ref[n:], atol=1e-9 * scale)


def test_lsq_min_norm_matches_pseudoinverse_randomized(rng):
    for _ in range(100):
        m, n = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        r = int(rng.integers(1, min(m, n) + 1))
        A = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
        b = rng.standard_normal(m)
        np.testing.assert_allclose(lsq_min_norm(A, b, rtol=1e-10), np.linalg.pinv(A, rcond=1e-10) @ b,
                                   rtol=1e-9, atol=1e-10)


def test_saddle_with_redundant_consistent_rows(rng):
    H = _spd(rng, 4)
    A = np.array([[1.0, 1.0, 0.0, 0.0], [2.0, 2.0, 0.0, 0.0]])
    x, _ = solve_saddle(QuadraticProgram(H, np.ones(4), A, np.array([1.0, 2.0])))
    assert x[0] + x[1] == pytest.approx(1.0)


def test_saddle_multi_column_right_hand_sides(rng):
    H = _spd(rng, 5)
    c = rng.standard_normal((5, 3))
    A = rng.standard_normal((2, 5))
    b = rng.standard_normal((2, 3))
    x, _ = solve_saddle(QuadraticProgram(H, c, A, b))
    for d in range(3):
        xd, _ = solve_saddle(QuadraticProgram(H, c[:, d], A, b[:, d]))
        np.testing.assert_allclose(x[:, d], xd, atol=1e-12)


def test_saddle_inconsistent_constraints():
    A = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(InfeasibleConstraintsError):
        solve_saddle(QuadraticProgram(np.eye(2), np.zeros(2), A, np.array([0.0, 1.0]), label="toy"))


def test_saddle_unbounded_objective():
    with pytest.raises(DegenerateSystemError):
        solve_saddle(QuadraticProgram(np.zeros((2, 2)), np.array([1.0, 0.0])))


def test_saddle_indefinite_hessian():
    with pytest.raises(DegenerateSystemError):
        solve_saddle(QuadraticProgram(np.diag([1.0, -1.0]), np.zeros(2)))


def test_saddle_singular_hessian_fixed_by_constraints():
    H = np.diag([1.0, 0.0])
    x, _ = solve_saddle(QuadraticProgram(H, np.array([-1.0, 0.0]), np.array([[0.0, 1.0]]), np.array([3.0])))
    np.testing.assert_allclose(x, [1.0, 3.0], atol=1e-12)


def test_program_rejects_asymmetric_hessian():
    with pytest.raises(InvalidArgumentError):
        QuadraticProgram(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))
