import itertools

import numpy as np
import pytest

from asg1.errors import ConformityError, InvalidArgumentError, RegularityError, TopologyError
from asg1.mpatch import (AnalyticSurfaceSource, InterfaceRecord, SquareFrame, build_topology, canonicalize,
                         check_regular, relative_errors, shared_dof_map, valency_and_sets, weighted_h1_norm)
from asg1.splinecore import SplinePatch, SplineSpace1D, eval_basis, eval_patch

FRAMES = [SquareFrame(*bits) for bits in itertools.product([False, True], repeat=3)]


@pytest.fixture
def random_patch(rng):
    space = SplineSpace1D(3, 1, 1)
    return SplinePatch(space, rng.standard_normal((space.n, space.n, 3)))


@pytest.mark.parametrize("frame", FRAMES)
def test_local_coefficients_describe_the_same_map(frame, random_patch, rng):
    space = random_patch.space
    s, t = rng.random(9), rng.random(9)
    local = frame.local_coeffs(random_patch.coeffs)
    via_local = np.einsum('ma,mb,abd->md', eval_basis(space, s)[0], eval_basis(space, t)[0], local)
    xi1, xi2 = frame.to_stored(s, t)
    np.testing.assert_allclose(via_local, eval_patch(random_patch, xi1, xi2)[0], atol=1e-12)


@pytest.mark.parametrize("frame", FRAMES)
def test_local_derivatives_follow_chain_rule(frame, random_patch, rng):
    s, t = 0.1 + 0.8 * rng.random(5), 0.1 + 0.8 * rng.random(5)
    h = 1e-5

    def f(ss, tt):
        return eval_patch(random_patch, *frame.to_stored(ss, tt))[0]

    for a, b in [(1, 0), (0, 1)]:
        l1, l2, sign = frame.derivative(a, b)
        exact = sign * eval_patch(random_patch, *frame.to_stored(s, t), [(l1, l2)])[0]
        fd = (f(s + a * h, t + b * h) - f(s - a * h, t - b * h)) / (2 * h)
        np.testing.assert_allclose(exact, fd, atol=1e-6)


@pytest.mark.parametrize("frame", FRAMES)
def test_transpose_swaps_local_coordinates(frame):
    s, t = np.array([0.2, 0.7]), np.array([0.9, 0.4])
    np.testing.assert_allclose(frame.transpose().to_stored(s, t), frame.to_stored(t, s))
    assert frame.transpose().det == -frame.det


def test_on_side_puts_s_zero_on_side():
    for side in ('u0', 'u1', 'v0', 'v1'):
        assert SquareFrame.on_side(side).side_u0() == side
    with pytest.raises(InvalidArgumentError):
        SquareFrame.on_side('w0')


def test_grid_topology_counts(bilinear):
    sets = valency_and_sets(bilinear.topology)
    assert len(sets['inner_interfaces']) == 4
    assert len(sets['boundary_curves']) == 8
    assert len(sets['inner_vertices']) == 1
    assert sorted(sets['valency'].values()) == [1, 1, 1, 1, 2, 2, 2, 2, 4]


def test_corner_domain_has_valency_three_vertex(corner):
    inner = [v for v in corner.topology.vertices if v.is_inner]
    assert len(inner) == 1 and inner[0].valency == 3


@pytest.mark.parametrize("geometry", ["bilinear", "corner"])
def test_vertex_views_glue_geometrically(geometry, request):
    F = request.getfixturevalue(geometry)
    src = F.source()
    xi = np.linspace(0.0, 1.0, 7)
    zero = np.zeros_like(xi)
    for vx in F.topology.vertices:
        for view in F.topology.vertex_views(vx.id):
            a = src.local(view.patch1, view.frame1, zero, xi, [(0, 0)])[0]
            b = src.local(view.patch2, view.frame2, xi, zero, [(0, 0)])[0]
            np.testing.assert_allclose(a, b, atol=1e-12)


def test_vertex_frames_are_right_handed(corner):
    src = corner.source()
    for vx in corner.topology.vertices:
        for patch, frame in zip(vx.patches, vx.frames):
            ds, dt = src.local(patch, frame, [0.0], [0.0], [(1, 0), (0, 1)])[:, 0]
            assert ds[0] * dt[1] - ds[1] * dt[0] > 0.0


def test_shared_dofs_match_global_grid(bilinear):
    n = bilinear.space.n
    maps, ndof = shared_dof_map(bilinear.topology, n)
    assert ndof == (2 * (n - 1) + 1) ** 2
    points = np.zeros((ndof, 3))
    for m, patch in zip(maps, bilinear.patches):
        points[m.ravel()] = patch.coeffs.reshape(-1, 3)
    for m, patch in zip(maps, bilinear.patches):
        np.testing.assert_array_equal(points[m.ravel()], patch.coeffs.reshape(-1, 3))


def test_self_interface_rejected():
    with pytest.raises(TopologyError):
        build_topology(1, [InterfaceRecord(0, 0, 'u0', 0, 'u1')])


def test_side_used_twice_rejected():
    with pytest.raises(TopologyError):
        build_topology(3, [InterfaceRecord(0, 0, 'u1', 1, 'u0'), InterfaceRecord(1, 0, 'u1', 2, 'u0')])


def test_boundary_must_cover_free_sides():
    with pytest.raises(TopologyError):
        build_topology(2, [InterfaceRecord(0, 0, 'u1', 1, 'u0')], boundary=[(0, 'u0')])


def test_non_orientable_strip_rejected():
    interfaces = [InterfaceRecord(0, 0, 'u1', 1, 'u0'), InterfaceRecord(1, 0, 'u0', 1, 'u1', reversed=True)]
    with pytest.raises(TopologyError):
        build_topology(2, interfaces)


def test_cylinder_is_orientable():
    interfaces = [InterfaceRecord(0, 0, 'u1', 1, 'u0'), InterfaceRecord(1, 0, 'u0', 1, 'u1')]
    topo = build_topology(2, interfaces)
    assert topo.orientation == (1, 1)
    assert len(topo.boundary) == 4


def test_vertex_records_are_checked(bilinear):
    rec = bilinear.topology.interfaces
    with pytest.raises(TopologyError):
        build_topology(4, rec, vertices=[{'kind': 'inner', 'patches_ccw': [0, 1, 2]}])


def test_canonicalize_pads_planar_and_detects_gaps():
    space = SplineSpace1D(1, 0, 0)
    net0 = np.array([[[0, 0], [0, 1]], [[1, 0], [1, 1]]], dtype=float)
    net1 = net0 + [1.0, 0.0]
    iface = [InterfaceRecord(0, 0, 'u1', 1, 'u0')]
    F = canonicalize(space, [net0, net1], iface)
    assert F.patches[0].coeffs.shape == (2, 2, 3)
    assert F.is_planar()
    bad = net1.copy()
    bad[0, 1] += 1e-3
    with pytest.raises(ConformityError) as err:
        canonicalize(space, [net0, bad], iface)
    assert err.value.gap == pytest.approx(1e-3)


def test_degenerate_patch_fails_regularity():
    space = SplineSpace1D(1, 0, 0)
    net = np.array([[[0, 0, 0], [0, 0, 0]], [[1, 0, 0], [1, 1, 0]]], dtype=float)
    F = canonicalize(space, [net], [])
    with pytest.raises(RegularityError):
        check_regular(F.source())


def test_relative_errors_vanish_on_identity(bilinear):
    e_l2, e_h1 = relative_errors(bilinear, bilinear.source())
    assert e_l2 == 0.0 and e_h1 == 0.0


def test_relative_errors_of_translated_copy(bilinear):
    moved = bilinear.transformed(np.eye(3), (0.0, 0.0, 1e-3))
    e_l2, e_h1 = relative_errors(moved, bilinear.source())
    assert 0.0 < e_h1 < e_l2 < 1e-3


def test_weighted_norm_of_unit_square_map():
    space = SplineSpace1D(1, 0, 0)
    net = np.array([[[0, 0, 0], [0, 1, 0]], [[1, 0, 0], [1, 1, 0]]], dtype=float)
    patch = SplinePatch(space, net)
    # int x^2 + y^2 = 2/3, each first partial contributes 1
    assert weighted_h1_norm(patch, 0.5) == pytest.approx(np.sqrt(2.0 / 3.0 + 0.5 * 2.0))


def test_analytic_source_finite_differences_match_exact():
    f = lambda u, v: np.stack([u, v, np.sin(u) * np.cos(v)], axis=1)

    def exact(u, v, l1, l2):
        if (l1, l2) == (0, 0):
            return f(u, v)
        z = {(1, 0): np.cos(u) * np.cos(v), (0, 1): -np.sin(u) * np.sin(v), (2, 0): -np.sin(u) * np.cos(v),
             (1, 1): -np.cos(u) * np.sin(v), (0, 2): -np.sin(u) * np.cos(v)}[(l1, l2)]
        return np.stack([np.full_like(u, l1 == 1 and l2 == 0), np.full_like(u, l1 == 0 and l2 == 1), z], axis=1)

    orders = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    u, v = np.array([0.3, 0.6]), np.array([0.5, 0.2])
    fd = AnalyticSurfaceSource([f]).derivatives(0, u, v, orders)
    ref = AnalyticSurfaceSource([f], [exact]).derivatives(0, u, v, orders)
    np.testing.assert_allclose(fd, ref, atol=1e-4)


def test_refined_geometry_is_the_same_surface(bilinear, rng):
    fine = bilinear.refined(1)
    u, v = rng.random(10), rng.random(10)
    for i in range(bilinear.num_patches):
        np.testing.assert_allclose(fine.evaluate(i, u, v), bilinear.evaluate(i, u, v), atol=1e-12)
