from dataclasses import dataclass

import numpy as np

import solver_base as sb

'''Compressible Neo-Hookean law in 1-D with zero Poisson ratio (lambda=0, mu=E/2), in nondimensional units.'''

class NonPositiveStretch(sb.SolverException):
    '''Raised when a stretch F <= 0 reaches the constitutive law. `index` locates the first offending entry in the input array.'''
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index

@dataclass(frozen=True)
class NeoHookeanParams:
    '''Modulus ratio E/E^A and density ratio rho0/rho0^A. Either field may be a scalar or an array (one entry per fine element).'''
    modulus_ratio: object = 1.0
    density_ratio: object = 1.0

    def __post_init__(self):
        if np.any(np.asarray(self.modulus_ratio) <= 0): raise ValueError("ERROR: modulus_ratio must be > 0.")
        if np.any(np.asarray(self.density_ratio) <= 0): raise ValueError("ERROR: density_ratio must be > 0.")

# MaterialField is the per-fine-element (piecewise constant) form of the same parameters.
MaterialField = NeoHookeanParams

def _check_stretch(F):
    F = np.asarray(F, dtype=float)
    if np.any(F <= 0):
        _bad = np.argwhere(F <= 0)[0] if F.ndim > 0 else ()
        _index = tuple(int(i) for i in _bad)
        raise NonPositiveStretch(f'ERROR: non-positive stretch F={F[_index]:.6g} at index {_index}.', _index)
    return F

def energy(params, F):
    '''psi(F) = E/4 (F^2 - 1 - 2 ln F)'''
    F = _check_stretch(F)
    return 0.25 * np.asarray(params.modulus_ratio) * (F * F - 1.0 - 2.0 * np.log(F))

def stress(params, F):
    '''First Piola-Kirchhoff stress P = E/2 (F - 1/F)'''
    F = _check_stretch(F)
    return 0.5 * np.asarray(params.modulus_ratio) * (F - 1.0 / F)

def tangent(params, F):
    '''D = dP/dF = E/2 (1 + 1/F^2)'''
    F = _check_stretch(F)
    return 0.5 * np.asarray(params.modulus_ratio) * (1.0 + 1.0 / (F * F))

def wave_speed_factor(params, F):
    return np.sqrt(tangent(params, F) / np.asarray(params.density_ratio))
