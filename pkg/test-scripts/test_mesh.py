import numpy as np
import pytest

import mesh as msh

class TestShapeFunctions:
    def test_partition_of_unity(self):
        xi = np.linspace(-1, 1, 11)
        np.testing.assert_allclose(msh.shape_values(xi).sum(axis=-1), 1.0)
        np.testing.assert_allclose(msh.shape_parent_gradients(xi).sum(axis=-1), 0.0, atol=1e-15)

    def test_nodal_interpolation(self):
        np.testing.assert_allclose(msh.shape_values(np.array([-1.0, 0.0, 1.0])), np.eye(3))

    def test_shape_eval_scales_gradients(self):
        elem = msh.QuadraticElement((0.0, 0.05, 0.1))
        N, dN, J = msh.shape_eval(elem, 0.0)
        assert J == pytest.approx(0.05)
        np.testing.assert_allclose(dN, [-10.0, 0.0, 10.0])
        np.testing.assert_allclose(N, [0.0, 1.0, 0.0])

    def test_shape_eval_rejects_outside_points(self):
        with pytest.raises(ValueError):
            msh.shape_eval(msh.QuadraticElement((0.0, 0.5, 1.0)), 1.5)

    def test_element_maps_are_inverse(self):
        elem = msh.QuadraticElement((0.2, 0.25, 0.3))
        xi = np.array([-1.0, -0.3, 0.7])
        np.testing.assert_allclose(elem.to_parent(elem.to_physical(xi)), xi)

class TestTwoScaleMesh:
    def test_sizes(self):
        m = msh.build_mesh(100, 1, 8)
        assert m.n_ec == 100
        assert m.coarse_nodes.shape == (201,)
        assert m.fine_nodes.shape == (100, 17)
        assert m.h_coarse == pytest.approx(0.01)
        assert m.h_fine == pytest.approx(0.00125)
        assert m.coarse_nodes[0] == pytest.approx(-0.5)
        assert m.coarse_nodes[-1] == pytest.approx(0.5)

    def test_subdomains_share_end_points(self):
        m = msh.build_mesh(5, 2, 4)
        np.testing.assert_allclose(m.fine_nodes[:-1, -1], m.fine_nodes[1:, 0])
        X = m.global_fine_nodes()
        assert len(X) == 5 * 8 + 1
        np.testing.assert_allclose(X, np.linspace(-0.5, 0.5, 41), atol=1e-15)

    def test_fine_to_coarse(self):
        m = msh.build_mesh(3, 2, 4)
        np.testing.assert_array_equal(m.fine_to_coarse, [[0, 0, 1, 1], [2, 2, 3, 3], [4, 4, 5, 5]])
        np.testing.assert_array_equal(m.gather_c_sub[1], [4, 5, 6, 7, 8])

    def test_fine_ends_are_constrained(self):
        m = msh.build_mesh(4, 1, 4)
        assert not m.fine_free[:, 0].any()
        assert not m.fine_free[:, -1].any()
        assert m.fine_free[:, 1:-1].all()
        np.testing.assert_array_equal(m.coarse_dirichlet, [0, 8])

    def test_traction_free_end_releases_fine_node(self):
        m = msh.build_mesh(4, 1, 4, msh.BoundaryConditions(left_fixed=False))
        assert m.fine_free[0, 0]
        assert not m.fine_free[1, 0]
        np.testing.assert_array_equal(m.coarse_dirichlet, [8])

    def test_boundary_rule(self):
        bc = msh.BoundaryConditions.from_rule({"left": "free", "right": "Fixed"})
        assert bc == msh.BoundaryConditions(False, True)
        assert msh.BoundaryConditions.from_rule(None) == msh.BoundaryConditions()

    def test_coarse_parent_coordinates_of_fine_point(self):
        m = msh.build_mesh(100, 1, 8)
        E, xi_c = msh.map_fine_to_coarse_parent(m, 50 * 8, 0.0)
        assert E == 50
        assert xi_c == pytest.approx(-0.875)

    def test_matched_grids_map_onto_gauss_points(self):
        m = msh.build_mesh(3, 4, 4)
        np.testing.assert_array_equal(m.xi_c, np.broadcast_to(msh.GAUSS_POINTS, m.xi_c.shape))
        np.testing.assert_array_equal(m.N_c, np.broadcast_to(msh.shape_values(msh.GAUSS_POINTS), m.N_c.shape))

    @pytest.mark.parametrize("n_es, n_ecp, n_ef", [(3, 1, 8), (5, 2, 8), (2, 4, 12)])
    def test_nested_coordinates_agree_with_physical_map(self, n_es, n_ecp, n_ef):
        m = msh.build_mesh(n_es, n_ecp, n_ef)
        _physical = msh._map_to_coarse_parent(m.coarse_nodes, m.coarse_connectivity, m.fine_nodes, m.fine_connectivity, m.fine_to_coarse, msh.GAUSS_POINTS)
        np.testing.assert_allclose(m.xi_c, _physical, atol=1e-12)

    def test_quadrature_points_lie_in_owning_coarse_element(self):
        m = msh.build_mesh(2, 2, 8)
        X = m.fine_quadrature_points()
        _left = m.coarse_nodes[m.coarse_connectivity[m.fine_to_coarse, 0]]
        _right = m.coarse_nodes[m.coarse_connectivity[m.fine_to_coarse, 2]]
        assert np.all((X > _left[..., None]) & (X < _right[..., None]))
        assert np.all(np.abs(m.xi_c) <= 1.0)

    def test_point_outside_coarse_element(self):
        m = msh.build_mesh(4, 1, 2)
        _wrong = (m.fine_to_coarse + 1) % m.n_ec
        with pytest.raises(msh.PointOutsideCoarseElement):
            msh._map_to_coarse_parent(m.coarse_nodes, m.coarse_connectivity, m.fine_nodes, m.fine_connectivity, _wrong, msh.GAUSS_POINTS)

class TestInvalidDiscretization:
    @pytest.mark.parametrize("n_es, n_ecp, n_ef", [(0, 1, 8), (10, 2, 7), (10, 4, 2), (10, 0, 8)])
    def test_rejected(self, n_es, n_ecp, n_ef):
        with pytest.raises(msh.InvalidDiscretization):
            msh.build_mesh(n_es, n_ecp, n_ef)

    def test_all_violations_reported(self):
        with pytest.raises(msh.InvalidDiscretization) as info:
            msh.build_mesh(0, 2, 7)
        assert "n_es" in str(info.value) and "divisible" in str(info.value)

class TestLineMesh:
    def test_sizes(self):
        m = msh.build_line_mesh(800)
        assert len(m.nodes) == 1601
        assert m.h == pytest.approx(1.0 / 800)
        np.testing.assert_array_equal(m.dirichlet, [0, 1600])
        np.testing.assert_allclose(m.wJ.sum(), m.h)

    def test_rejects_empty_mesh(self):
        with pytest.raises(msh.InvalidDiscretization):
            msh.build_line_mesh(0)
