import math
from dataclasses import dataclass

import numpy as np

import assembly
import material as mat
import mesh as msh
import solver_base as sb
from results import Snapshot

'''Problem construction in nondimensional units (length L, modulus and density of phase A): initial pulse, layered microstructure, total field reconstruction and run-to-run error metrics.'''

class NonConformingPhase(sb.SolverException):
    pass

class MissingSnapshot(sb.SolverException):
    pass

class ZeroReference(sb.SolverException):
    pass

@dataclass(frozen=True)
class Microstructure:
    '''Periodic two-phase layering: E=1 on [kl - 1/2, (k+beta)l - 1/2) and E=C on the rest of each cell.'''
    contrast: float = 1.0
    fraction: float = 0.5

    def __post_init__(self):
        if self.contrast <= 0: raise ValueError("ERROR: contrast must be > 0.")
        if not (0.0 < self.fraction < 1.0): raise ValueError("ERROR: fraction must be in (0, 1).")

    def modulus_at(self, X, n_es):
        _s = (np.asarray(X, dtype=float) - msh.X_LEFT) * n_es
        _frac = _s - np.floor(_s)
        return np.where(_frac < self.fraction, 1.0, self.contrast)

@dataclass(frozen=True)
class InitialPulse:
    '''u(X, 0) = a (1 - tanh^2(X/c)), v(X, 0) = 0.'''
    amplitude: float = 0.04
    width: float = 0.05

    def __post_init__(self):
        if self.width <= 0: raise ValueError("ERROR: pulse width must be > 0.")

    def displacement(self, X):
        _t = np.tanh(np.asarray(X, dtype=float) / self.width)
        return self.amplitude * (1.0 - _t * _t)

@dataclass(frozen=True)
class Scaling:
    '''Reference length, modulus and density of phase A; converts dimensional inputs to nondimensional ones.'''
    length: float = 1.0
    modulus: float = 1.0
    density: float = 1.0

    @property
    def wave_speed(self):
        return math.sqrt(self.modulus / self.density)

    def length_to_nd(self, x):
        return x / self.length

    def time_to_nd(self, t):
        return t * self.wave_speed / self.length

def build_initial_condition(pulse, mesh):
    '''Pulse sampled at the coarse nodes (or the nodes of a single-scale mesh); constrained dofs are set to zero.'''
    if isinstance(mesh, msh.TwoScaleMesh):
        d = pulse.displacement(mesh.coarse_nodes)
        d[mesh.coarse_dirichlet] = 0.0
    else:
        d = pulse.displacement(mesh.nodes)
        d[mesh.dirichlet] = 0.0
    return d

def build_modulus_field(micro, mesh, n_es=None):
    '''Piecewise constant modulus per fine element (per element for a single-scale mesh, which needs the cell count n_es), density 1.'''
    if isinstance(mesh, msh.TwoScaleMesh):
        n_es, _per_cell, _midpoints = mesh.n_es, mesh.n_ef, mesh.fine_midpoints
    else:
        if n_es is None or mesh.n_el % n_es != 0:
            raise NonConformingPhase(f'ERROR: {mesh.n_el} elements cannot be split into {n_es} cells.')
        _per_cell, _midpoints = mesh.n_el // n_es, mesh.midpoints
    _phase_elements = micro.fraction * _per_cell
    if abs(_phase_elements - round(_phase_elements)) > 1e-9:
        raise NonConformingPhase(f'ERROR: fraction {micro.fraction} x {_per_cell} elements per cell = {_phase_elements} is not an integer; phase boundaries must fall on element boundaries.')
    return mat.MaterialField(micro.modulus_at(_midpoints, n_es), 1.0)

## Total field ##

def interpolate_quadratic(nodes, values, points):
    '''Evaluate the piecewise quadratic interpolant defined on nodes (2n+1, element i on nodes 2i..2i+2) at points.'''
    nodes = np.asarray(nodes)
    _left, _right = nodes[0:-1:2], nodes[2::2]
    points = np.asarray(points, dtype=float)
    e = np.clip(np.searchsorted(_right, points, side="left"), 0, len(_left) - 1)
    xi = np.clip(2.0 * (points - _left[e]) / (_right[e] - _left[e]) - 1.0, -1.0, 1.0)
    _conn = 2 * e[..., None] + np.arange(3)
    return (msh.shape_values(xi) * np.asarray(values)[_conn]).sum(axis=-1)

def global_fine_values(mesh, d_f):
    '''Stitch per subdomain fine vectors onto the global fine node list; shared end nodes carry zero on both sides.'''
    return np.concatenate([d_f[0]] + [d_f[a, 1:] for a in range(1, mesh.n_es)])

def total_displacement(state, mesh, points):
    '''u = u^c + u^f(owning subdomain) at points, the two parts evaluated separately and summed. state needs d_c and d_f.'''
    _u_c = interpolate_quadratic(mesh.coarse_nodes, state.d_c, points)
    _u_f = interpolate_quadratic(mesh.global_fine_nodes(), global_fine_values(mesh, state.d_f), points)
    return _u_c + _u_f

def element_averaged_stretch(mesh, d_c, d_f):
    return assembly.stretch_at_quadrature(mesh, d_c, d_f).mean(axis=-1).ravel()

def multiscale_snapshot(mesh, d_c, d_f, time, step=0):
    X = mesh.global_fine_nodes()
    _u_c = interpolate_quadratic(mesh.coarse_nodes, d_c, X)
    _u_f = global_fine_values(mesh, d_f)
    return Snapshot(float(time), X, _u_c + _u_f, _u_c, _u_f.copy(), element_averaged_stretch(mesh, d_c, d_f), step)

def line_snapshot(mesh, d, time, step=0):
    _d = np.array(d, dtype=float)
    return Snapshot(float(time), mesh.nodes.copy(), _d, _d.copy(), np.zeros_like(_d),
                    assembly.line_stretch(mesh, _d).mean(axis=-1), step)

## Error metrics ##

def _snapshot_near(run, time, tolerance):
    snapshot = run.nearest_snapshot(time)
    if snapshot is None or abs(snapshot.time - time) > tolerance:
        raise MissingSnapshot(f'ERROR: {run.solver} has no snapshot within {tolerance:.3e} of t={time}.')
    return snapshot

def compare_at(run_a, run_b, time, denom_floor=1e-12, tolerance=None):
    '''||u_a - u_b||_inf / ||u_b||_inf at the snapshots nearest to time, sampled on the union of both runs' node coordinates.

    Returns (error, time used from run_a, time used from run_b). tolerance defaults to one step of each run.'''
    _s_a = _snapshot_near(run_a, time, tolerance if tolerance is not None else run_a.max_dt)
    _s_b = _snapshot_near(run_b, time, tolerance if tolerance is not None else run_b.max_dt)
    _points = np.union1d(_s_a.X, _s_b.X)
    _u_a = interpolate_quadratic(_s_a.X, _s_a.u_total, _points)
    _u_b = interpolate_quadratic(_s_b.X, _s_b.u_total, _points)
    _ref = np.max(np.abs(_u_b))
    if _ref < denom_floor:
        raise ZeroReference(f'ERROR: reference field of {run_b.solver} is zero at t={_s_b.time}.')
    return float(np.max(np.abs(_u_a - _u_b)) / _ref), _s_a.time, _s_b.time

def total_variation(values):
    return float(np.sum(np.abs(np.diff(values))))

def relative_error_linf(run_a, run_b, time, denom_floor=1e-12, tolerance=None):
    return compare_at(run_a, run_b, time, denom_floor, tolerance)[0]
