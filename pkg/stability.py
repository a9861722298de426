import math
from dataclasses import dataclass

import numpy as np

import assembly
import material as mat
import solver_base as sb

'''Element level eigenvalue bounds and the scheme dependent stable time increment.'''

# Schemes whose stability limit is set by the explicit central difference rule; the sub-step schemes allow CFL up to 1/p.
CDM_SCHEMES = ("EE-CDM", "cdm")

class DtFloor(sb.SolverException):
    pass

@dataclass(frozen=True)
class CriticalDt:
    dt_dns: float
    dt_coarse: float
    dt_fine: float
    cfl: float
    scheme: str
    coarse_governs: bool = False

    @property
    def governing(self):
        return self.dt_coarse if self.coarse_governs else self.dt_fine

def element_max_frequency(h, material, stretches_at_quad):
    '''(omega_0)_e = 2 sqrt(6)/h max_q sqrt(D(F_q)/rho). The maximum is taken over the last axis of stretches_at_quad.'''
    if np.any(np.asarray(h) <= 0): raise ValueError(f'ERROR: element length must be > 0, got {h}.')
    _c = mat.wave_speed_factor(material, stretches_at_quad)
    return 2.0 * math.sqrt(6.0) / h * np.max(_c, axis=-1)

def cfl_cap(scheme, p):
    return 1.0 if scheme in CDM_SCHEMES else 1.0 / p

def clamp_cfl(cfl, scheme, p):
    '''Return (cfl actually used, True when the requested value exceeded the cap).'''
    _cap = cfl_cap(scheme, p)
    return (_cap, True) if cfl > _cap else (cfl, False)

def critical_dt_dns(mesh, material, d, cfl):
    F = assembly.line_stretch(mesh, d)
    try:
        omega = element_max_frequency(mesh.h, assembly.line_params(mesh, material), F)
    except mat.NonPositiveStretch as ex:
        e, q = ex.index
        raise mat.NonPositiveStretch(f'ERROR: non-positive stretch in element {e}, quadrature point {q}.', (int(e), int(q))) from ex
    return cfl * float(np.min(2.0 / omega))

def critical_dt_multiscale(mesh, material, d_c, d_f, scheme, cfl, coarse_governs=None):
    '''Fine bound from fine element sizes, coarse bound from coarse element sizes with the maximum over every fine Gauss point inside each coarse element.

    The explicit-explicit schemes are governed by the fine bound and EI-SSM by the coarse bound; coarse_governs overrides the rule (coarse-only runs).'''
    F = assembly.stretch_at_quadrature(mesh, d_c, d_f)
    params = assembly.element_params(mesh, material)
    try:
        _c = mat.wave_speed_factor(params, F)
    except mat.NonPositiveStretch as ex:
        i, e, q = ex.index
        raise mat.NonPositiveStretch(f'ERROR: non-positive stretch in subdomain {i}, fine element {e}, quadrature point {q}.', (int(i), int(e), int(q))) from ex
    _omega_f = 2.0 * math.sqrt(6.0) / mesh.h_fine * np.max(_c, axis=-1)
    _per_coarse = _c.reshape(mesh.n_es, mesh.n_ecp, -1)
    _omega_c = 2.0 * math.sqrt(6.0) / mesh.h_coarse * np.max(_per_coarse, axis=-1)
    dt_fine = cfl * float(np.min(2.0 / _omega_f))
    dt_coarse = cfl * float(np.min(2.0 / _omega_c))
    if coarse_governs is None: coarse_governs = (scheme == "EI-SSM")
    # The fine grid resolves the microstructure, so its bound doubles as the single-scale estimate.
    return CriticalDt(dt_fine, dt_coarse, dt_fine, cfl, scheme, coarse_governs)

def check_floor(dt, dt_floor, step):
    if dt < dt_floor:
        raise DtFloor(f'ERROR: stable time increment {dt:.3e} fell below the floor {dt_floor:.1e} at step {step}.')
    return dt
