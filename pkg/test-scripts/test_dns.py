from dataclasses import replace

import numpy as np
import pytest

import dns
import integrate
import mesh as msh
import scenario
from conftest import line_problem

class TestDnsRun:
    @pytest.mark.parametrize("scheme", dns.DNS_SCHEMES)
    def test_zero_trajectory(self, scheme):
        problem = line_problem(32, 4, a=0.0, end_time=0.05, scheme=scheme)
        solver = dns.DnsSolver("dns")
        result = solver.solve(problem)
        assert solver.final_state.step > 0
        assert all(not s.u_total.any() for s in result.snapshots)
        assert all(s.energy == 0.0 for s in result.steps)

    def test_end_time_zero(self):
        result = dns.dns_run(line_problem(32, 4, end_time=0.0))
        assert len(result.snapshots) == 1 and not result.steps

    def test_ends_stay_clamped(self):
        problem = line_problem(40, 10, contrast=2.0, a=0.01, c=0.1, end_time=0.1)
        solver = dns.DnsSolver("dns")
        solver.solve(problem)
        np.testing.assert_array_equal(solver.final_state.d[problem.mesh.dirichlet], 0.0)

    def test_pulse_splits_into_two_waves(self):
        problem = line_problem(200, 25, a=1e-4, c=0.05, end_time=0.2, snapshot_times=(0.2,))
        s = dns.dns_run(problem).snapshots[-1]
        _left, _right = s.X < 0, s.X > 0
        assert s.X[_left][np.argmax(s.u_total[_left])] == pytest.approx(-0.2, abs=0.01)
        assert s.X[_right][np.argmax(s.u_total[_right])] == pytest.approx(0.2, abs=0.01)
        assert s.u_total.max() == pytest.approx(0.5e-4, rel=0.05)

    def test_invalid_problem(self):
        m = msh.build_line_mesh(8)
        with pytest.raises(ValueError):
            dns.DnsProblem(m, scenario.build_modulus_field(scenario.Microstructure(), m, 4), np.zeros(17), 0.1, 1.0, "")
        with pytest.raises(ValueError):
            dns.DnsSolver("dns").solve(dns.DnsProblem(m, scenario.build_modulus_field(scenario.Microstructure(), m, 4), np.zeros(17), 0.1, 1.0, "leapfrog"))
        with pytest.raises(ValueError):
            dns.DnsProblem(m, scenario.build_modulus_field(scenario.Microstructure(), m, 4), np.zeros(17), 0.1, 0.0)

class TestSharedKernels:
    '''With fine dofs frozen and one fine element per coarse element the multiscale path reduces to the single-scale one.'''
    def _pair(self):
        micro, pulse = scenario.Microstructure(2.0, 0.5), scenario.InitialPulse(0.01, 0.1)
        m = msh.build_mesh(10, 4, 4)
        vme_problem = integrate.MultiscaleProblem(m, scenario.build_modulus_field(micro, m), scenario.build_initial_condition(pulse, m), 0.05)
        line = msh.build_line_mesh(40)
        dns_problem = dns.DnsProblem(line, scenario.build_modulus_field(micro, line, 10), scenario.build_initial_condition(pulse, line), 0.05, 1.0, "cdm")
        return vme_problem, dns_problem

    def test_initial_accelerations(self):
        vme_problem, dns_problem = self._pair()
        system = integrate.SplitSystem(vme_problem.mesh, vme_problem.material, integrate.IntegratorConfig("EE-CDM", 1.0, freeze_fine=True))
        state, _ = integrate.initial_accelerations(integrate.initial_state(vme_problem), system)
        line_system = dns.LineSystem(dns_problem.mesh, dns_problem.material)
        expected = line_system.acceleration(dns_problem.initial_displacement)
        assert np.array_equal(state.a_c, expected)

    @pytest.mark.parametrize("scheme, dns_scheme", [("EE-CDM", "cdm"), ("EE-SSM", "sub-step"), ("EI-SSM", "sub-step")])
    def test_frozen_run_matches_dns_bit_for_bit(self, scheme, dns_scheme):
        vme_problem, dns_problem = self._pair()
        dns_problem = replace(dns_problem, scheme=dns_scheme)
        vme = integrate.VmeSolver("vme", None, integrate.IntegratorConfig(scheme, 1.0, freeze_fine=True))
        ref = dns.DnsSolver("dns")
        vme_result, ref_result = vme.solve(vme_problem), ref.solve(dns_problem)
        assert len(vme_result.steps) == len(ref_result.steps) > 0
        assert [s.dt for s in vme_result.steps] == [s.dt for s in ref_result.steps]
        a, b = vme.final_state, ref.final_state
        assert a.time == b.time
        assert np.array_equal(a.d_c, b.d) and np.array_equal(a.v_c, b.v) and np.array_equal(a.a_c, b.a)
        assert not a.d_f.any()
        np.testing.assert_allclose(vme_result.snapshots[-1].X, ref_result.snapshots[-1].X, atol=1e-15)

class TestStretchProfile:
    def test_reference_state(self):
        result = dns.dns_run(line_problem(16, 4, a=0.0, end_time=0.0))
        np.testing.assert_allclose(dns.element_stretch_profile(result, 0), 1.0)

    def test_uniform_stretch(self):
        m = msh.build_line_mesh(10)
        s = scenario.line_snapshot(m, 0.05 * m.nodes, 0.0)
        np.testing.assert_allclose(s.F_avg, 1.05)

    def test_tension_and_compression(self):
        np.testing.assert_array_equal(dns.tension_sign(np.array([1.01, 0.99, 1.0, 1.0005]), 1e-3), [1, -1, 0, 0])

    def test_traveling_front_has_both_signs(self):
        problem = line_problem(200, 25, a=0.01, c=0.05, end_time=0.15, snapshot_times=(0.149,))
        result = dns.dns_run(problem)
        sign = dns.tension_sign(dns.element_stretch_profile(result, -1), 1e-6)
        mid = len(sign) // 2
        assert {1, -1} <= set(sign[mid:]) and {1, -1} <= set(sign[:mid])
