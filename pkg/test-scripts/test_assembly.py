import numpy as np
import pytest

import assembly
import material as mat
import mesh as msh
import scenario

def _state(m, rng, scale=0.01):
    d_c = scale * rng.standard_normal(m.n_coarse_dofs)
    d_f = scale * rng.standard_normal((m.n_es, m.n_fine_nodes)) * m.fine_free
    return d_c, d_f

def _layered(m, contrast=3.0):
    return scenario.build_modulus_field(scenario.Microstructure(contrast, 0.5), m)

class TestMasses:
    def test_single_element_fine_mass(self, homogeneous):
        m = msh.build_mesh(1, 1, 1)
        ops = assembly.assemble_masses(m, homogeneous)
        np.testing.assert_allclose(ops.M_f[0], np.array([[4, 2, -1], [2, 16, 2], [-1, 2, 4]]) / 30.0, atol=1e-15)
        np.testing.assert_allclose(ops.M_f_lumped[0], [1 / 6, 2 / 3, 1 / 6])

    def test_total_mass(self):
        m = msh.build_mesh(6, 2, 4)
        ops = assembly.assemble_masses(m, mat.NeoHookeanParams(1.0, 2.0))
        assert ops.M_c_lumped.sum() == pytest.approx(2.0)
        assert ops.M_f_lumped.sum() == pytest.approx(2.0)

    def test_matched_grids_coupling_equals_fine_mass(self, homogeneous):
        m = msh.build_mesh(3, 4, 4)
        ops = assembly.assemble_masses(m, homogeneous)
        np.testing.assert_allclose(ops.M_cf, ops.M_f, atol=1e-14)
        _Mc = ops.M_c.toarray()
        for a in range(m.n_es):
            _g = m.gather_c_sub[a]
            np.testing.assert_allclose(_Mc[np.ix_(_g[1:-1], _g[1:-1])], ops.M_f[a][1:-1, 1:-1], atol=1e-14)

    def test_coupling_transpose(self, homogeneous):
        m = msh.build_mesh(4, 2, 8)
        ops = assembly.assemble_masses(m, homogeneous)
        for a in range(m.n_es):
            np.testing.assert_array_equal(ops.M_fc[a], ops.M_cf[a].T)

    def test_coupling_products(self, homogeneous, rng):
        m = msh.build_mesh(3, 1, 4)
        ops = assembly.assemble_masses(m, homogeneous)
        a_c = rng.standard_normal(m.n_coarse_dofs)
        a_f = rng.standard_normal((m.n_es, m.n_fine_nodes))
        _dense = np.zeros((m.n_coarse_dofs, m.n_es * m.n_fine_nodes))
        for a in range(m.n_es):
            _dense[np.ix_(m.gather_c_sub[a], a * m.n_fine_nodes + np.arange(m.n_fine_nodes))] = ops.M_cf[a]
        np.testing.assert_allclose(ops.coupling_to_coarse(a_f), _dense @ a_f.ravel(), atol=1e-14)
        np.testing.assert_allclose(ops.coupling_to_fine(a_c).ravel(), _dense.T @ a_c, atol=1e-14)

    def test_decoupled_mode(self, homogeneous):
        ops = assembly.assemble_masses(msh.build_mesh(2, 1, 4), homogeneous, coupling=False)
        assert not ops.M_cf.any()

class TestForces:
    def test_zero_state(self, homogeneous):
        m = msh.build_mesh(3, 1, 4)
        _zc, _zf = np.zeros(m.n_coarse_dofs), np.zeros((m.n_es, m.n_fine_nodes))
        assert not assembly.coarse_internal_force(m, homogeneous, _zc, _zf).any()
        assert not assembly.fine_internal_force(m, homogeneous, _zc, _zf).any()

    def test_uniform_stretch(self, homogeneous):
        m = msh.build_mesh(5, 2, 4)
        eps = 0.1
        f = assembly.coarse_internal_force(m, homogeneous, eps * m.coarse_nodes, np.zeros((m.n_es, m.n_fine_nodes)))
        P = mat.stress(homogeneous, 1.0 + eps)
        assert f[0] == pytest.approx(-P)
        assert f[-1] == pytest.approx(P)
        np.testing.assert_allclose(f[1:-1], 0.0, atol=1e-12)

    def test_coarse_force_is_energy_gradient(self, rng):
        m = msh.build_mesh(3, 1, 4)
        material = _layered(m)
        d_c, d_f = _state(m, rng)
        f = assembly.coarse_internal_force(m, material, d_c, d_f)
        eps = 1e-6
        fd = np.zeros_like(f)
        for j in range(len(d_c)):
            e = np.zeros_like(d_c)
            e[j] = eps
            fd[j] = (assembly.strain_energy(m, material, d_c + e, d_f) - assembly.strain_energy(m, material, d_c - e, d_f)) / (2 * eps)
        np.testing.assert_allclose(fd, f, rtol=1e-5, atol=1e-8)

    def test_fine_force_chunks(self, homogeneous, rng):
        m = msh.build_mesh(4, 1, 4)
        d_c, d_f = _state(m, rng)
        full = assembly.fine_internal_force(m, homogeneous, d_c, d_f)
        part = assembly.fine_internal_force(m, homogeneous, d_c, d_f[[1, 3]], [1, 3])
        np.testing.assert_array_equal(part, full[[1, 3]])

    def test_matched_grids_reproduce_single_scale_force(self, rng):
        m = msh.build_mesh(4, 2, 2)
        line = msh.build_line_mesh(8)
        micro = scenario.Microstructure(2.0, 0.5)
        d = 0.01 * rng.standard_normal(m.n_coarse_dofs)
        f_c = assembly.coarse_internal_force(m, scenario.build_modulus_field(micro, m), d, np.zeros((m.n_es, m.n_fine_nodes)))
        f_l = assembly.line_internal_force(line, scenario.build_modulus_field(micro, line, 4), d)
        np.testing.assert_allclose(f_c, f_l, rtol=1e-10, atol=1e-12)

    def test_non_positive_stretch_is_located(self, homogeneous):
        m = msh.build_mesh(2, 1, 2)
        d_f = np.zeros((m.n_es, m.n_fine_nodes))
        d_f[1, 1] = 1.0
        with pytest.raises(mat.NonPositiveStretch) as info:
            assembly.fine_internal_force(m, homogeneous, np.zeros(m.n_coarse_dofs), d_f)
        assert info.value.index[0] == 1
        assert info.value.index[1] == 0

class TestTangents:
    def test_reference_element_stiffness(self, homogeneous):
        m = msh.build_mesh(1, 1, 1)
        K = assembly.fine_tangent(m, homogeneous, np.zeros(3), np.zeros((1, 3)))
        np.testing.assert_allclose(K[0], np.array([[7, -8, 1], [-8, 16, -8], [1, -8, 7]]) / 3.0, atol=1e-14)

    def test_fine_tangent_matches_finite_differences(self, rng):
        m = msh.build_mesh(2, 1, 4)
        material = _layered(m)
        d_c, d_f = _state(m, rng, 0.005)
        K = assembly.fine_tangent(m, material, d_c, d_f)
        eps = 1e-7
        for a in range(m.n_es):
            fd = np.zeros_like(K[a])
            for j in range(m.n_fine_nodes):
                e = np.zeros_like(d_f)
                e[a, j] = eps
                fd[:, j] = (assembly.fine_internal_force(m, material, d_c, d_f + e)[a] - assembly.fine_internal_force(m, material, d_c, d_f - e)[a]) / (2 * eps)
            assert np.linalg.norm(fd - K[a]) <= 1e-5 * np.linalg.norm(K[a])

    def test_coarse_tangent_matches_finite_differences(self, rng):
        m = msh.build_mesh(3, 2, 4)
        material = _layered(m)
        d_c, d_f = _state(m, rng, 0.005)
        K = assembly.coarse_tangent(m, material, d_c, d_f).toarray()
        eps = 1e-7
        fd = np.zeros_like(K)
        for j in range(m.n_coarse_dofs):
            e = np.zeros_like(d_c)
            e[j] = eps
            fd[:, j] = (assembly.coarse_internal_force(m, material, d_c + e, d_f) - assembly.coarse_internal_force(m, material, d_c - e, d_f)) / (2 * eps)
        assert np.linalg.norm(fd - K) <= 1e-5 * np.linalg.norm(K)

    def test_coupling_tangent_matches_finite_differences(self, rng):
        m = msh.build_mesh(3, 2, 4)
        material = _layered(m)
        d_c, d_f = _state(m, rng, 0.005)
        K_cf = assembly.coupling_tangent(m, material, d_c, d_f)
        assert K_cf.shape == (m.n_es, 2 * m.n_ecp + 1, m.n_fine_nodes)
        eps = 1e-7
        for a in range(m.n_es):
            fd = np.zeros_like(K_cf[a])
            for j in range(m.n_fine_nodes):
                e = np.zeros_like(d_f)
                e[a, j] = eps
                _df = (assembly.coarse_internal_force(m, material, d_c, d_f + e) - assembly.coarse_internal_force(m, material, d_c, d_f - e)) / (2 * eps)
                fd[:, j] = _df[m.gather_c_sub[a]]
            assert np.linalg.norm(fd - K_cf[a]) <= 1e-5 * np.linalg.norm(K_cf[a])
        np.testing.assert_allclose(assembly.coupling_tangent(m, material, d_c, d_f[1:], ids=[1, 2]), K_cf[1:])

    def test_tangents_are_symmetric_and_annihilate_rigid_motion(self, homogeneous):
        m = msh.build_mesh(3, 2, 4)
        K = assembly.coarse_tangent(m, homogeneous, np.zeros(m.n_coarse_dofs), np.zeros((m.n_es, m.n_fine_nodes))).toarray()
        np.testing.assert_allclose(K, K.T, atol=1e-12)
        np.testing.assert_allclose(K.sum(axis=1), 0.0, atol=1e-10)

    def test_matched_grids_coarse_tangent_equals_fine(self, homogeneous):
        m = msh.build_mesh(1, 4, 4)
        _zc, _zf = np.zeros(m.n_coarse_dofs), np.zeros((1, m.n_fine_nodes))
        np.testing.assert_allclose(assembly.coarse_tangent(m, homogeneous, _zc, _zf).toarray(), assembly.fine_tangent(m, homogeneous, _zc, _zf)[0], atol=1e-10)

class TestEnergy:
    def test_kinetic_energy_of_uniform_velocity(self, homogeneous):
        m = msh.build_mesh(4, 1, 4)
        v_c = np.ones(m.n_coarse_dofs)
        assert assembly.kinetic_energy(m, homogeneous, v_c, np.zeros((m.n_es, m.n_fine_nodes))) == pytest.approx(0.5)

    def test_line_energy_matches_two_scale_energy(self, homogeneous, rng):
        m = msh.build_mesh(4, 2, 2)
        line = msh.build_line_mesh(8)
        d, v = 0.01 * rng.standard_normal(m.n_coarse_dofs), rng.standard_normal(m.n_coarse_dofs)
        _zf = np.zeros((m.n_es, m.n_fine_nodes))
        _two_scale = assembly.strain_energy(m, homogeneous, d, _zf) + assembly.kinetic_energy(m, homogeneous, v, _zf)
        assert assembly.line_energy(line, homogeneous, d, v) == pytest.approx(_two_scale, rel=1e-12)
