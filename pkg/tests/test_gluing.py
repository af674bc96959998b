"""Tests for gluing data estimation and the G1 residual."""
import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from asg1.gluing import (GluingData, GluingEntry, SideGluing, beta_composite, estimate_gluing,
                         estimate_gluing_planar_bilinear, g1_residual, gluing_for)


def _view_residual(S, view, entry, xi):
    zero = np.zeros_like(xi)
    ds1, dt1 = S.local(view.patch1, view.frame1, zero, xi, ((1, 0), (0, 1)))
    ds2, dt2 = S.local(view.patch2, view.frame2, xi, zero, ((1, 0), (0, 1)))
    res = (entry.side1.alpha(xi)[:, None] * dt2 + entry.side2.alpha(xi)[:, None] * ds1
           - beta_composite(entry, xi)[:, None] * dt1)
    return float(np.linalg.norm(res, axis=1).max())


class TestSideGluing:
    def test_linear_in_xi(self):
        s = SideGluing(1.0, 3.0, -0.5, 0.5)
        np.testing.assert_allclose(s.alpha([0.0, 0.5, 1.0]), [1.0, 2.0, 3.0])
        np.testing.assert_allclose(s.beta([0.0, 0.5, 1.0]), [-0.5, 0.0, 0.5])
        np.testing.assert_allclose(s.alpha([0.3], deriv=1), [2.0])

    def test_reversed_runs_backwards(self):
        s = SideGluing(1.0, 2.0, 0.25, -0.75)
        xi = np.linspace(0.0, 1.0, 7)
        r = s.reversed()
        np.testing.assert_allclose(r.alpha(xi), s.alpha(1.0 - xi))
        np.testing.assert_allclose(r.beta(xi), -s.beta(1.0 - xi))
        assert r.reversed() == s

    def test_reoriented_twice_is_identity(self):
        e = GluingEntry(4, SideGluing(1.0, 2.0, 0.1, 0.2), SideGluing(3.0, 4.0, -0.3, 0.4))
        for swapped in (False, True):
            for rev in (False, True):
                assert e.reoriented(swapped, rev).reoriented(swapped, rev) == e
        assert e.reoriented(swapped=True).side1 == e.side2


class TestEstimation:
    def test_bilinear_grid_is_g1_with_linear_gluing(self, bilinear):
        gluing = estimate_gluing(bilinear.source(), bilinear.topology)
        assert len(gluing) == len(bilinear.topology.interfaces)
        residuals = g1_residual(bilinear.source(), bilinear.topology, gluing)
        assert max(residuals.values()) <= 1e-10

    def test_alpha_product_positive(self, bilinear, corner):
        for geometry in (bilinear, corner):
            gluing = estimate_gluing(geometry.source(), geometry.topology)
            assert min(e.min_alpha_product() for e in gluing.entries.values()) > 0.0

    def test_planar_variant_matches_surface_variant(self, bilinear):
        S, topo = bilinear.source(), bilinear.topology
        surface = estimate_gluing(S, topo)
        for rec in topo.interfaces:
            planar = estimate_gluing_planar_bilinear(S, topo, rec.id)
            for a, b in ((planar.side1, surface[rec.id].side1), (planar.side2, surface[rec.id].side2)):
                np.testing.assert_allclose(np.abs([a.a0, a.a1]), [b.a0, b.a1], rtol=1e-12)
                np.testing.assert_allclose([a.b0, a.b1], [b.b0, b.b1], atol=1e-12)

    def test_threads_do_not_change_the_estimate(self, corner):
        one = estimate_gluing(corner.source(), corner.topology, threads=1)
        many = estimate_gluing(corner.source(), corner.topology, threads=3)
        assert one == many

    def test_rigid_motion_leaves_the_gluing_unchanged(self, perturbed):
        R = Rotation.from_euler('zyx', [-0.3, 0.9, 0.5]).as_matrix()
        moved = perturbed.transformed(R, (0.5, 0.0, -1.0))
        base = estimate_gluing(perturbed.source(), perturbed.topology)
        image = estimate_gluing(moved.source(), moved.topology)
        for rec in perturbed.topology.interfaces:
            for a, b in ((base[rec.id].side1, image[rec.id].side1), (base[rec.id].side2, image[rec.id].side2)):
                np.testing.assert_allclose([b.a0, b.a1, b.b0, b.b1], [a.a0, a.a1, a.b0, a.b1], atol=1e-10)

    def test_perturbed_grid_is_not_g1(self, perturbed):
        gluing = estimate_gluing(perturbed.source(), perturbed.topology)
        assert max(g1_residual(perturbed.source(), perturbed.topology, gluing).values()) > 1e-4

    def test_negated_beta_breaks_the_relation(self, bilinear):
        gluing = estimate_gluing(bilinear.source(), bilinear.topology)
        wrong = gluing.negated_beta()
        assert max(g1_residual(bilinear.source(), bilinear.topology, wrong).values()) > 1e-6
        assert wrong.negated_beta() == gluing


class TestViews:
    def test_vertex_views_satisfy_the_relation(self, bilinear, corner):
        xi = np.linspace(0.0, 1.0, 11)
        for geometry in (bilinear, corner):
            S, topo = geometry.source(), geometry.topology
            gluing = estimate_gluing(S, topo)
            for vx in topo.vertices:
                for view in topo.vertex_views(vx.id):
                    assert _view_residual(S, view, gluing.view(view), xi) <= 1e-10

    def test_interface_view_is_canonical(self, bilinear):
        gluing = estimate_gluing(bilinear.source(), bilinear.topology)
        view = bilinear.topology.interface_view(0)
        assert gluing.view(view) == gluing[0]


class TestRecords:
    def test_records_round_trip(self, corner):
        gluing = estimate_gluing(corner.source(), corner.topology)
        records = gluing.to_records()
        assert [r['interface'] for r in records] == sorted(gluing.entries)
        assert all(len(r['side1']) == 4 and len(r['side2']) == 4 for r in records)
        assert GluingData.from_records(records) == gluing

    def test_gluing_for_prefers_complete_stored_data(self, bilinear):
        stored = estimate_gluing(bilinear.source(), bilinear.topology).negated_beta()
        assert gluing_for(bilinear, stored) is stored
        partial = GluingData({0: stored[0]})
        assert gluing_for(bilinear, partial) == estimate_gluing(bilinear.source(), bilinear.topology)
        with pytest.raises(KeyError):
            partial[1]
