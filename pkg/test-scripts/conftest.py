import numpy as np
import pytest

import dns
import integrate
import material as mat
import mesh as msh
import scenario

def small_problem(n_es=4, n_ecp=1, n_ef=4, contrast=1.0, a=0.01, c=0.1, end_time=0.02, snapshot_times=(), bc=None):
    mesh = msh.build_mesh(n_es, n_ecp, n_ef, bc)
    material = scenario.build_modulus_field(scenario.Microstructure(contrast, 0.5), mesh)
    d0 = scenario.build_initial_condition(scenario.InitialPulse(a, c), mesh)
    return integrate.MultiscaleProblem(mesh, material, d0, end_time, tuple(snapshot_times))

def line_problem(n_el, n_es, contrast=1.0, a=0.04, c=0.05, end_time=0.02, cfl=1.0, scheme="sub-step", snapshot_times=()):
    mesh = msh.build_line_mesh(n_el)
    material = scenario.build_modulus_field(scenario.Microstructure(contrast, 0.5), mesh, n_es)
    d0 = scenario.build_initial_condition(scenario.InitialPulse(a, c), mesh)
    return dns.DnsProblem(mesh, material, d0, end_time, cfl, scheme, snapshot_times=tuple(snapshot_times))

@pytest.fixture
def homogeneous():
    return mat.NeoHookeanParams()

@pytest.fixture
def rng():
    return np.random.default_rng(1234)
