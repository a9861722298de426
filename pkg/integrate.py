import time as _time
from dataclasses import dataclass, replace

import numpy as np

import assembly
import scenario
import solver_base as sb
import stability
from results import RunResult, StepRecord

'''Operator-split time integration of the coupled coarse/fine system: EE-CDM, EE-SSM (explicit sub-step at both scales) and EI-SSM (explicit coarse, implicit fine), plus the driver that advances a problem to its end time.'''

# Built-in schemes; a run description may register more under schemes.<NAME>.stepper.
SCHEMES = ("EE-CDM", "EE-SSM", "EI-SSM")
COARSE_SOLVES = ("condensed", "lumped")

# Singular values of the condensed coarse matrix below this fraction of the largest are treated as zero.
CONDENSED_RCOND = 1e-10

class InvalidSubstepRatio(sb.SolverException):
    pass

class SplitNonConvergence(sb.SolverException):
    pass

class NewtonNonConvergence(sb.SolverException):
    pass

class SingularTangent(sb.SolverException):
    pass

### Configuration and constants ###

@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str
    cfl: float
    p: float = 0.54
    tol_c: float = 1e-3
    tol_f: float = 1e-3
    tol_newton: float = 1e-10
    max_split_iters: int = 50
    max_newton_iters: int = 25
    denom_floor: float = 1e-12
    dt_floor: float = 1e-9
    freeze_fine: bool = False
    coupling_mass: bool = True
    workers: int = 1
    coarse_solve: str = "condensed"

    def __post_init__(self):
        if not self.scheme: raise ValueError("ERROR: scheme name is empty.")
        if self.coarse_solve not in COARSE_SOLVES: raise ValueError(f'ERROR: unknown coarse solve {self.coarse_solve}; expected one of {", ".join(COARSE_SOLVES)}.')
        if not (0.0 < self.p < 1.0): raise InvalidSubstepRatio(f'ERROR: sub-step ratio p={self.p} must lie in (0, 1).')
        _errors = [name for name in ("cfl", "tol_c", "tol_f", "tol_newton", "denom_floor", "dt_floor") if not getattr(self, name) > 0]
        _errors += [name for name in ("max_split_iters", "max_newton_iters", "workers") if getattr(self, name) < 1]
        if _errors: raise ValueError(f'ERROR: invalid integrator settings: {", ".join(_errors)}.')

@dataclass(frozen=True)
class SubstepConstants:
    '''Sub-step weights. The a-constants carry powers of dt and are produced per step by scaled(dt).'''
    p: float
    q0: float
    q1: float
    q2: float

    def scaled(self, dt):
        a0 = self.p * dt
        a3 = (1.0 - self.p) * dt
        return (a0, 0.5 * a0 * a0, 0.5 * a0, a3, 0.5 * a3 * a3, self.q0 * a3, (0.5 + self.q1) * a3, self.q2 * a3)

def substep_constants(p):
    if not (0.0 < p < 1.0): raise InvalidSubstepRatio(f'ERROR: sub-step ratio p={p} must lie in (0, 1).')
    q1 = (1.0 - 2.0 * p) / (2.0 * p * (1.0 - p))
    q2 = 0.5 - p * q1
    q0 = -q1 - q2 + 0.5
    return SubstepConstants(p, q0, q1, q2)

def implicit_constants(p, dt):
    if not (0.0 < p < 1.0): raise InvalidSubstepRatio(f'ERROR: sub-step ratio p={p} must lie in (0, 1).')
    c1 = (1.0 - p) / (p * dt)
    c2 = -1.0 / ((1.0 - p) * p * dt)
    c3 = (2.0 - p) / ((1.0 - p) * dt)
    return c1, c2, c3

### State ###

@dataclass(eq=False)
class MultiscaleState:
    '''Coarse vectors are global; fine vectors are (n_es, 2 n_ef + 1) in local numbering with constrained entries held at zero.'''
    d_c: np.ndarray
    v_c: np.ndarray
    a_c: np.ndarray
    d_f: np.ndarray
    v_f: np.ndarray
    a_f: np.ndarray
    time: float = 0.0
    step: int = 0

    def copy(self):
        return MultiscaleState(self.d_c.copy(), self.v_c.copy(), self.a_c.copy(), self.d_f.copy(), self.v_f.copy(), self.a_f.copy(), self.time, self.step)

@dataclass(frozen=True)
class SplitStats:
    split_iters: int = 0
    newton_iters: int = 0
    worst_subdomain: int = -1

    def __add__(self, other):
        return SplitStats(self.split_iters + other.split_iters, max(self.newton_iters, other.newton_iters),
                          other.worst_subdomain if other.worst_subdomain >= 0 else self.worst_subdomain)

@dataclass(eq=False)
class MultiscaleProblem:
    mesh: object
    material: object
    initial_displacement: np.ndarray        # coarse nodal values; fine fields start at zero
    end_time: float
    snapshot_times: tuple = ()
    initial_velocity: np.ndarray = None

def relative_change(new, old, denom_floor):
    '''Row-wise ||new - old||_inf over the field-wide ||old||_inf; the absolute norm is returned when that scale is below denom_floor.

    For a fine field (n_es, nfn) each subdomain is measured against the peak over all subdomains, so quiet far-field
    subdomains do not hold the split open on changes that are roundoff next to the wave.'''
    _num = np.max(np.abs(new - old), axis=-1)
    _den = float(np.max(np.abs(old)))
    return _num if _den < denom_floor else _num / _den

### Split system ###

class SplitSystem:
    '''Masses, forces and the per scale solves one time step needs.'''
    def __init__(self, mesh, material, config):
        self.mesh = mesh
        self.material = material
        self.config = config
        self.ops = assembly.assemble_masses(mesh, material, coupling=config.coupling_mass)
        self.free = mesh.fine_free.astype(float)
        self.coupled = config.coupling_mass and not config.freeze_fine
        self.condensed = self.coupled and config.coarse_solve == "condensed"
        self._condensed_inverse = {}
        _free = mesh.fine_free
        _eye = np.eye(mesh.n_fine_nodes)[None]
        self._pin = _eye * (~_free)[:, None, :]
        self._keep = (_free[:, :, None] & _free[:, None, :]).astype(float)

    @property
    def freeze_fine(self):
        return self.config.freeze_fine

    def zeros_fine(self):
        return np.zeros((self.mesh.n_es, self.mesh.n_fine_nodes))

    def masked(self, A, ids):
        '''Replace constrained rows and columns by the identity.'''
        return A * self._keep[ids] + self._pin[ids]

    def _rows(self, fn):
        return np.concatenate(sb.map_subdomains(fn, self.mesh.n_es, self.config.workers))

    def coarse_rhs(self, d_c, d_f, t):
        return assembly.coarse_external_force(self.mesh, t) - assembly.coarse_internal_force(self.mesh, self.material, d_c, d_f)

    def fine_rhs(self, d_c, d_f, t):
        def _chunk(ids):
            return assembly.fine_external_force(self.mesh, t, ids) - assembly.fine_internal_force(self.mesh, self.material, d_c, d_f[ids], ids)
        return self._rows(_chunk)

    def solve_coarse(self, rhs_c, a_f):
        '''Lumped coarse solve with the coupling term on the right hand side; Dirichlet accelerations are zero.'''
        a_c = (rhs_c - self.ops.coupling_to_coarse(a_f)) / self.ops.M_c_lumped
        a_c[self.mesh.coarse_dirichlet] = 0.0
        return a_c

    def coarse_residual(self, rhs_c, a_c, a_f):
        '''rhs_c - M_cf a_f - M_c a_c with the lumped coarse mass; zero at Dirichlet dofs.'''
        r = rhs_c - self.ops.coupling_to_coarse(a_f) - self.ops.M_c_lumped * a_c
        r[self.mesh.coarse_dirichlet] = 0.0
        return r

    def _condense(self, blocks):
        '''diag(M_c lumped) minus the subdomain blocks (n_es, 2 n_ecp + 1, 2 n_ecp + 1) scattered onto the coarse dofs.'''
        S = np.diag(self.ops.M_c_lumped)
        _g = self.ops.gather_c_sub
        np.add.at(S, (_g[:, :, None], _g[:, None, :]), -blocks)
        _dir = self.mesh.coarse_dirichlet
        S[_dir, :] = 0.0
        S[:, _dir] = 0.0
        S[_dir, _dir] = self.ops.M_c_lumped[_dir]
        return S

    def _fine_solve_coupling(self, A, what):
        '''A^-1 diag(free) M_fc for every subdomain; A holds masked fine matrices (n_es, nfn, nfn).'''
        try:
            return np.linalg.solve(A, self.free[:, :, None] * self.ops.M_fc)
        except np.linalg.LinAlgError as ex:
            raise SingularTangent(f'ERROR: singular {what}.') from ex

    def condensed_inverse(self, consistent_fine=False):
        '''Pseudo-inverse of the coarse mass condensed over the fine acceleration solve, built once per fine mass kind.

        Coarse modes the fine grid reproduces exactly carry no condensed mass; the pseudo-inverse leaves them to the fine scale.'''
        if consistent_fine not in self._condensed_inverse:
            if consistent_fine:
                _X = self._fine_solve_coupling(self.masked(self.ops.M_f, np.arange(self.mesh.n_es)), "fine mass matrix")
            else:
                _X = (self.free / self.ops.M_f_lumped)[:, :, None] * self.ops.M_fc
            S = self._condense(self.ops.M_cf @ _X)
            self._condensed_inverse[consistent_fine] = np.linalg.pinv(S, rcond=CONDENSED_RCOND, hermitian=True)
        return self._condensed_inverse[consistent_fine]

    def correct_coarse(self, rhs_c, a_c, a_f, consistent_fine=False):
        '''Condensed coarse update a_c + S^+ (rhs_c - M_cf a_f - M_c a_c) for explicit fine solves.'''
        a_c = a_c + self.condensed_inverse(consistent_fine) @ self.coarse_residual(rhs_c, a_c, a_f)
        a_c[self.mesh.coarse_dirichlet] = 0.0
        return a_c

    def correct_coarse_implicit(self, rhs_c, a_c, a_f, d_c, d_f, alpha):
        '''Condensed coarse update for Newton fine solves, linearized about the current fine iterate.

        The fine response to a coarse change is -J^-1 M_fc da_c with J = alpha M_f + K_f, and it feeds back through
        both the coupling mass and the coarse internal force, so S = M_c - (alpha M_cf + K_cf) J^-1 M_fc.'''
        mesh = self.mesh
        _all = np.arange(mesh.n_es)
        J = self.masked(alpha * self.ops.M_f + assembly.fine_tangent(mesh, self.material, d_c, d_f), _all)
        _X = self._fine_solve_coupling(J, "fine tangent in the condensed coarse update")
        _K_cf = assembly.coupling_tangent(mesh, self.material, d_c, d_f)
        S = self._condense((alpha * self.ops.M_cf + _K_cf) @ _X)
        a_c = a_c + np.linalg.lstsq(S, self.coarse_residual(rhs_c, a_c, a_f), rcond=CONDENSED_RCOND)[0]
        a_c[mesh.coarse_dirichlet] = 0.0
        return a_c

    def solve_fine_lumped(self, rhs_f, a_c):
        return (rhs_f - self.ops.coupling_to_fine(a_c)) / self.ops.M_f_lumped * self.free

    def solve_fine_consistent(self, rhs_f, a_c):
        _rhs = (rhs_f - self.ops.coupling_to_fine(a_c)) * self.free
        _ids = np.arange(self.mesh.n_es)
        try:
            return np.linalg.solve(self.masked(self.ops.M_f, _ids), _rhs[..., None])[..., 0]
        except np.linalg.LinAlgError as ex:
            raise SingularTangent("ERROR: singular fine mass matrix.") from ex

    def newton(self, d_c, a_c, guess, accel, alpha, t, step):
        '''Solve M a(d) + f_int(d_c, d) + M_fc a_c = f_ext for the fine displacements of every subdomain.

        accel(d, ids) recovers the fine acceleration from a displacement iterate and alpha = da/dd is the mass coefficient of the Jacobian.'''
        def _chunk(ids):
            return self._newton_chunk(ids, d_c, a_c, guess[ids].copy(), accel, alpha, t, step)
        _results = sb.map_subdomains(_chunk, self.mesh.n_es, self.config.workers)
        d = np.concatenate([r[0] for r in _results])
        a = np.concatenate([r[1] for r in _results])
        return d, a, max(r[2] for r in _results)

    def _newton_chunk(self, ids, d_c, a_c, d, accel, alpha, t, step):
        mesh, cfg = self.mesh, self.config
        M = self.ops.M_f[ids]
        _free = self.free[ids]
        _coupling = self.ops.coupling_to_fine(a_c, ids)
        _f_ext = assembly.fine_external_force(mesh, t, ids)
        for it in range(cfg.max_newton_iters + 1):
            a = accel(d, ids)
            R = (_f_ext - (M * a[:, None, :]).sum(axis=-1) - assembly.fine_internal_force(mesh, self.material, d_c, d, ids) - _coupling) * _free
            _norms = np.linalg.norm(R, axis=1)
            active = _norms >= cfg.tol_newton
            if not active.any(): return d, a, it
            if it == cfg.max_newton_iters: break
            _ids = ids[active]
            J = self.masked(alpha * M[active] + assembly.fine_tangent(mesh, self.material, d_c, d[active], _ids), _ids)
            try:
                d[active] += np.linalg.solve(J, R[active][..., None])[..., 0]
            except np.linalg.LinAlgError as ex:
                raise SingularTangent(f'ERROR: singular fine tangent at step {step} in subdomains {list(_ids)}.') from ex
        _worst = int(ids[np.argmax(_norms)])
        raise NewtonNonConvergence(f'ERROR: Newton did not converge in {cfg.max_newton_iters} iterations at step {step}; worst subdomain {_worst} (residual {_norms.max():.3e}).')

    def energy(self, state):
        return assembly.strain_energy(self.mesh, self.material, state.d_c, state.d_f) + assembly.kinetic_energy(self.mesh, self.material, state.v_c, state.v_f)

### Split loops ###

def _first_pass_change(system):
    '''Coarse change reported by the first pass. A condensed update starts from a_c = 0, so it has no previous iterate to compare with.'''
    return np.inf if system.condensed else 0.0

def _explicit_split(system, d_c, d_f, a_f_seed, t, step, consistent_fine=False):
    '''Fixed point between the coarse and the fine acceleration solves at fixed displacements.'''
    cfg = system.config
    rhs_c = system.coarse_rhs(d_c, d_f, t)
    if system.freeze_fine:
        return system.solve_coarse(rhs_c, system.zeros_fine()), system.zeros_fine(), SplitStats(1)
    rhs_f = system.fine_rhs(d_c, d_f, t)
    _solve_fine = system.solve_fine_consistent if consistent_fine else system.solve_fine_lumped
    a_f, a_c_prev = a_f_seed, None
    for k in range(1, cfg.max_split_iters + 1):
        if system.condensed:
            a_c = system.correct_coarse(rhs_c, np.zeros_like(rhs_c) if a_c_prev is None else a_c_prev, a_f, consistent_fine)
        else:
            a_c = system.solve_coarse(rhs_c, a_f)
        a_f_new = _solve_fine(rhs_f, a_c)
        e_f = relative_change(a_f_new, a_f, cfg.denom_floor)
        e_c = _first_pass_change(system) if a_c_prev is None else float(relative_change(a_c, a_c_prev, cfg.denom_floor))
        a_f, a_c_prev = a_f_new, a_c
        _worst = int(np.argmax(e_f))
        if not system.coupled or (e_f[_worst] < cfg.tol_f and e_c < cfg.tol_c):
            return a_c, a_f, SplitStats(k, 0, _worst)
    raise SplitNonConvergence(f'ERROR: operator split did not converge in {cfg.max_split_iters} iterations at step {step}; worst subdomain {_worst} (fine error {e_f[_worst]:.3e}, coarse error {e_c:.3e}).')

def _implicit_split(system, d_c, d_f, a_f, accel, alpha, t, step):
    '''Fixed point between the explicit coarse solve and the implicit (Newton) fine solves; d_f, a_f are the initial iterate.'''
    cfg = system.config
    _a_c_prev, _newton = None, 0
    for k in range(1, cfg.max_split_iters + 1):
        rhs_c = system.coarse_rhs(d_c, d_f, t)
        if system.condensed:
            a_c = system.correct_coarse_implicit(rhs_c, np.zeros_like(rhs_c) if _a_c_prev is None else _a_c_prev, a_f, d_c, d_f, alpha)
        else:
            a_c = system.solve_coarse(rhs_c, a_f)
        d_f_new, a_f_new, _its = system.newton(d_c, a_c, d_f, accel, alpha, t, step)
        _newton = max(_newton, _its)
        e_f = np.maximum(relative_change(a_f_new, a_f, cfg.denom_floor), relative_change(d_f_new, d_f, cfg.denom_floor))
        e_c = _first_pass_change(system) if _a_c_prev is None else float(relative_change(a_c, _a_c_prev, cfg.denom_floor))
        d_f, a_f, _a_c_prev = d_f_new, a_f_new, a_c
        _worst = int(np.argmax(e_f))
        if e_f[_worst] < cfg.tol_f and e_c < cfg.tol_c:
            return a_c, d_f, a_f, SplitStats(k, _newton, _worst)
    raise SplitNonConvergence(f'ERROR: operator split did not converge in {cfg.max_split_iters} iterations at step {step}; worst subdomain {_worst} (fine error {e_f[_worst]:.3e}, coarse error {e_c:.3e}).')

### Steppers ###

def step_ee_cdm(state, dt, system):
    '''Central difference at both scales: predictor, split acceleration solve, trapezoidal velocity update.'''
    _t1 = state.time + dt
    d_c = state.d_c + dt * state.v_c + 0.5 * dt * dt * state.a_c
    d_f = state.d_f + dt * state.v_f + 0.5 * dt * dt * state.a_f
    a_c, a_f, stats = _explicit_split(system, d_c, d_f, state.a_f, _t1, state.step + 1)
    v_c = state.v_c + 0.5 * dt * (state.a_c + a_c)
    v_f = state.v_f + 0.5 * dt * (state.a_f + a_f)
    return MultiscaleState(d_c, v_c, a_c, d_f, v_f, a_f, _t1, state.step + 1), stats

def step_ee_ssm(state, dt, system):
    '''Explicit sub-step update at t_{n+p}, then the full step at t_{n+1}, each with its own split loop.'''
    a0, a1, a2, a3, a4, a5, a6, a7 = substep_constants(system.config.p).scaled(dt)
    _step = state.step + 1
    d_cp = state.d_c + a0 * state.v_c + a1 * state.a_c
    d_fp = state.d_f + a0 * state.v_f + a1 * state.a_f
    a_cp, a_fp, _sub = _explicit_split(system, d_cp, d_fp, state.a_f, state.time + a0, _step)
    v_cp = state.v_c + a2 * (state.a_c + a_cp)
    v_fp = state.v_f + a2 * (state.a_f + a_fp)

    _t1 = state.time + dt
    d_c = d_cp + a3 * v_cp + a4 * a_cp
    d_f = d_fp + a3 * v_fp + a4 * a_fp
    a_c, a_f, _full = _explicit_split(system, d_c, d_f, a_fp, _t1, _step)
    v_c = v_cp + a5 * state.a_c + a6 * a_cp + a7 * a_c
    v_f = v_fp + a5 * state.a_f + a6 * a_fp + a7 * a_f
    return MultiscaleState(d_c, v_c, a_c, d_f, v_f, a_f, _t1, _step), _sub + _full

def step_ei_ssm(state, dt, system):
    '''Explicit sub-step coarse update with implicit composite fine updates solved by Newton-Raphson.'''
    p = system.config.p
    a0, a1, a2, a3, a4, a5, a6, a7 = substep_constants(p).scaled(dt)
    c1, c2, c3 = implicit_constants(p, dt)
    _step = state.step + 1
    if system.freeze_fine:
        return step_ee_ssm(state, dt, system)

    d_n, v_n, a_n = state.d_f, state.v_f, state.a_f
    _k_sub = 4.0 / (a0 * a0)

    def _accel_sub(d, ids):
        return (d - d_n[ids] - v_n[ids] * a0) * _k_sub - a_n[ids]

    d_cp = state.d_c + a0 * state.v_c + a1 * state.a_c
    _guess = d_n + a0 * v_n + a1 * a_n
    a_cp, d_fp, a_fp, _sub = _implicit_split(system, d_cp, _guess, _accel_sub(_guess, slice(None)), _accel_sub, _k_sub, state.time + a0, _step)
    v_cp = state.v_c + a2 * (state.a_c + a_cp)
    v_fp = ((d_fp - d_n) * (2.0 / a0) - v_n) * system.free

    def _accel_full(d, ids):
        return c3 * (c3 * d + c2 * d_fp[ids] + c1 * d_n[ids]) + c2 * v_fp[ids] + c1 * v_n[ids]

    _t1 = state.time + dt
    d_c = d_cp + a3 * v_cp + a4 * a_cp
    _guess = d_fp + a3 * v_fp + a4 * a_fp
    a_c, d_f, a_f, _full = _implicit_split(system, d_c, _guess, _accel_full(_guess, slice(None)), _accel_full, c3 * c3, _t1, _step)
    v_c = v_cp + a5 * state.a_c + a6 * a_cp + a7 * a_c
    v_f = (c3 * d_f + c2 * d_fp + c1 * d_n) * system.free
    return MultiscaleState(d_c, v_c, a_c, d_f, v_f, a_f * system.free, _t1, _step), _sub + _full

STEPPERS = {"EE-CDM": step_ee_cdm, "EE-SSM": step_ee_ssm, "EI-SSM": step_ei_ssm}

def initial_accelerations(state0, system):
    '''Accelerations at t=0 from the coupled coarse/fine acceleration equations at the initial displacements.'''
    _consistent = system.config.scheme == "EI-SSM"
    a_c, a_f, stats = _explicit_split(system, state0.d_c, state0.d_f, system.zeros_fine(), state0.time, 0, consistent_fine=_consistent)
    return replace(state0, a_c=a_c, a_f=a_f), stats

def initial_state(problem):
    mesh = problem.mesh
    d_c = np.array(problem.initial_displacement, dtype=float)
    v_c = np.zeros_like(d_c) if problem.initial_velocity is None else np.array(problem.initial_velocity, dtype=float)
    _zf = np.zeros((mesh.n_es, mesh.n_fine_nodes))
    return MultiscaleState(d_c, v_c, np.zeros_like(d_c), _zf, _zf.copy(), _zf.copy())

def total_energy(system, state):
    return system.energy(state)

### Driver ###

class SnapshotRecorder():
    '''Keep the step nearest to each requested time. Requests are served in increasing order; the initial state is always kept.'''
    def __init__(self, result, times, end_time, make_snapshot):
        self._result = result
        self._pending = sorted(float(t) for t in times)
        self._make = make_snapshot
        self._recorded_steps = set()
        self.dropped = [t for t in self._pending if t > end_time]
        self._pending = [t for t in self._pending if t <= end_time]
        self._requested = bool(self._pending)

    def record(self, state):
        if state.step in self._recorded_steps: return
        self._recorded_steps.add(state.step)
        self._result.add_snapshot(self._make(state))

    def advance(self, previous, current):
        while self._pending and self._pending[0] <= current.time:
            _t = self._pending.pop(0)
            self.record(previous if abs(previous.time - _t) < abs(current.time - _t) else current)

    def finish(self, final):
        '''Keep the final state when no request fell inside the run.'''
        if not self._requested: self.record(final)

class VmeSolver(sb.SolverBase):
    '''Advance a MultiscaleProblem with one of the split schemes.'''
    def __init__(self, id, run_config, config, stepper=None):
        super().__init__(id, run_config)
        self._config = config
        if stepper is None and config.scheme not in STEPPERS: raise ValueError(f'ERROR: no stepper given for scheme {config.scheme}.')
        self._stepper = stepper or STEPPERS[config.scheme]
        self.final_state = None

    def solve(self, problem):
        cfg = self._config
        _start = _time.perf_counter()
        _cfl, _clamped = stability.clamp_cfl(cfg.cfl, cfg.scheme, cfg.p)
        if _clamped: self.warn(f'CFL {cfg.cfl} exceeds the {cfg.scheme} limit; using {_cfl}.')
        mesh = problem.mesh
        system = SplitSystem(mesh, problem.material, cfg)
        state, _ = initial_accelerations(initial_state(problem), system)

        result = RunResult(self.id)
        recorder = SnapshotRecorder(result, problem.snapshot_times, problem.end_time,
                                    lambda s: scenario.multiscale_snapshot(mesh, s.d_c, s.d_f, s.time, s.step))
        for _t in recorder.dropped: self.warn(f'snapshot time {_t} is after the end time {problem.end_time}; skipped.')
        recorder.record(state)
        _coarse_governs = True if cfg.freeze_fine else None
        while state.time < problem.end_time:
            crit = stability.critical_dt_multiscale(mesh, problem.material, state.d_c, state.d_f, cfg.scheme, _cfl, _coarse_governs)
            dt = stability.check_floor(crit.governing, cfg.dt_floor, state.step + 1)
            previous = state
            state, stats = self._stepper(state, dt, system)
            result.add_step(StepRecord(state.step, state.time, dt, stats.split_iters, stats.newton_iters, stats.worst_subdomain, system.energy(state)))
            recorder.advance(previous, state)
            if state.step % 100 == 0: self.info(f'step {state.step} t={state.time:.5f} dt={dt:.3e} split={stats.split_iters}')
        recorder.finish(state)
        result.wall_seconds = _time.perf_counter() - _start
        self.info(f'finished {state.step} steps at t={state.time:.5f} in {result.wall_seconds:.2f}s')
        self.final_state = state
        return result

def run(problem, config, run_config=None, stepper=None):
    return VmeSolver("vme", run_config, config, stepper).solve(problem)
