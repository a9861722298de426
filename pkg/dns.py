import time as _time
from dataclasses import dataclass

import numpy as np

import assembly
import integrate
import scenario
import solver_base as sb
import stability
from results import RunResult, StepRecord

'''Single-scale reference solver over the fully resolved microstructure with lumped-mass explicit time stepping.'''

# Built-in DNS integrators; more may be registered under dns-schemes.<NAME>.stepper.
DNS_SCHEMES = ("cdm", "sub-step")

@dataclass(eq=False)
class DnsProblem:
    mesh: object                        # mesh.LineMesh
    material: object                    # one parameter set per element
    initial_displacement: np.ndarray
    end_time: float
    cfl: float
    scheme: str = "sub-step"
    p: float = 0.54
    snapshot_times: tuple = ()
    dt_floor: float = 1e-9
    initial_velocity: np.ndarray = None

    def __post_init__(self):
        if not self.scheme: raise ValueError("ERROR: DNS scheme name is empty.")
        if not self.cfl > 0: raise ValueError("ERROR: cfl must be > 0.")
        integrate.substep_constants(self.p)

@dataclass(eq=False)
class LineState:
    d: np.ndarray
    v: np.ndarray
    a: np.ndarray
    time: float = 0.0
    step: int = 0

class LineSystem:
    '''Lumped mass and the explicit acceleration solve of the single-scale mesh.'''
    def __init__(self, mesh, material, p=0.54):
        self.mesh = mesh
        self.material = material
        self.constants = integrate.substep_constants(p)
        self.M, self.M_lumped = assembly.line_masses(mesh, material)

    def acceleration(self, d, t=0.0):
        a = (np.zeros(len(d)) - assembly.line_internal_force(self.mesh, self.material, d)) / self.M_lumped
        a[self.mesh.dirichlet] = 0.0
        return a

    def energy(self, state):
        return assembly.line_energy(self.mesh, self.material, state.d, state.v)

def step_cdm(s, dt, system):
    d = s.d + dt * s.v + 0.5 * dt * dt * s.a
    a = system.acceleration(d, s.time + dt)
    return LineState(d, s.v + 0.5 * dt * (s.a + a), a, s.time + dt, s.step + 1)

def step_substep(s, dt, system):
    a0, a1, a2, a3, a4, a5, a6, a7 = system.constants.scaled(dt)
    d_p = s.d + a0 * s.v + a1 * s.a
    a_p = system.acceleration(d_p, s.time + a0)
    v_p = s.v + a2 * (s.a + a_p)
    d = d_p + a3 * v_p + a4 * a_p
    a = system.acceleration(d, s.time + dt)
    return LineState(d, v_p + a5 * s.a + a6 * a_p + a7 * a, a, s.time + dt, s.step + 1)

STEPPERS = {"cdm": step_cdm, "sub-step": step_substep}

class DnsSolver(sb.SolverBase):
    def __init__(self, id, run_config=None, stepper=None):
        super().__init__(id, run_config)
        self._stepper = stepper
        self.final_state = None

    def solve(self, problem):
        _start = _time.perf_counter()
        mesh, material = problem.mesh, problem.material
        system = LineSystem(mesh, material, problem.p)
        if self._stepper is None and problem.scheme not in STEPPERS: raise ValueError(f'ERROR: no stepper given for DNS scheme {problem.scheme}.')
        _stepper = self._stepper or STEPPERS[problem.scheme]
        _cfl, _clamped = stability.clamp_cfl(problem.cfl, problem.scheme, problem.p)
        if _clamped: self.warn(f'CFL {problem.cfl} exceeds the DNS {problem.scheme} limit; using {_cfl}.')

        d = np.array(problem.initial_displacement, dtype=float)
        v = np.zeros_like(d) if problem.initial_velocity is None else np.array(problem.initial_velocity, dtype=float)
        state = LineState(d, v, system.acceleration(d))

        result = RunResult(self.id)
        recorder = integrate.SnapshotRecorder(result, problem.snapshot_times, problem.end_time,
                                              lambda s: scenario.line_snapshot(mesh, s.d, s.time, s.step))
        for _t in recorder.dropped: self.warn(f'snapshot time {_t} is after the end time {problem.end_time}; skipped.')
        recorder.record(state)
        while state.time < problem.end_time:
            dt = stability.check_floor(stability.critical_dt_dns(mesh, material, state.d, _cfl), problem.dt_floor, state.step + 1)
            previous = state
            state = _stepper(state, dt, system)
            result.add_step(StepRecord(state.step, state.time, dt, 1, 0, -1, system.energy(state)))
            recorder.advance(previous, state)
            if state.step % 100 == 0: self.info(f'step {state.step} t={state.time:.5f} dt={dt:.3e}')
        recorder.finish(state)
        result.wall_seconds = _time.perf_counter() - _start
        self.info(f'finished {state.step} steps at t={state.time:.5f} in {result.wall_seconds:.2f}s')
        self.final_state = state
        return result

def dns_run(problem, run_config=None, stepper=None):
    return DnsSolver("dns", run_config, stepper).solve(problem)

def element_stretch_profile(result, index):
    '''Element-averaged stretch of snapshot `index`; entries above 1 are in tension, below 1 in compression.'''
    return result.snapshots[index].F_avg

def tension_sign(F_avg, tol=0.0):
    '''+1 where an element is stretched, -1 where it is compressed, 0 otherwise.'''
    return np.where(F_avg > 1.0 + tol, 1, np.where(F_avg < 1.0 - tol, -1, 0))
