from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix

import material as mat

'''Element integrals and global operators of both scales. Coarse quantities are integrated over the underlying fine grid: every integral runs over the fine Gauss points, with coarse shape functions evaluated at their mapped coarse parent coordinates.'''

## Helpers ##

def _ids(mesh, ids):
    return np.arange(mesh.n_es) if ids is None else np.atleast_1d(np.asarray(ids, dtype=int))

def element_params(mesh, material, ids=None):
    '''Per fine element parameters broadcast to (subdomains, fine elements, 1) so they line up with quadrature arrays.'''
    _shape = (mesh.n_es, mesh.n_ef)
    _E = np.broadcast_to(np.asarray(material.modulus_ratio, dtype=float), _shape)
    _rho = np.broadcast_to(np.asarray(material.density_ratio, dtype=float), _shape)
    ids = _ids(mesh, ids)
    return mat.NeoHookeanParams(_E[ids][..., None], _rho[ids][..., None])

def _evaluate(law, params, F, ids):
    '''Evaluate a constitutive function, re-raising NonPositiveStretch with the subdomain/element/quadrature location.'''
    try:
        return law(params, F)
    except mat.NonPositiveStretch as ex:
        i, e, q = ex.index
        _location = (int(ids[i]), int(e), int(q))
        raise mat.NonPositiveStretch(f'ERROR: non-positive stretch F={F[i, e, q]:.6g} in subdomain {_location[0]}, fine element {e}, quadrature point {q}.', _location) from ex

def _fine_vector(fe, n_fn):
    '''Scatter element vectors (..., n_ef, 3) onto the local fine nodes (..., 2 n_ef + 1).'''
    f = np.zeros(fe.shape[:-2] + (n_fn,))
    f[..., 0:-1:2] += fe[..., 0]
    f[..., 1::2] += fe[..., 1]
    f[..., 2::2] += fe[..., 2]
    return f

def _fine_matrix(ke, n_fn):
    '''Scatter element matrices (k, n_ef, 3, 3) into dense per subdomain matrices (k, n_fn, n_fn).'''
    K = np.zeros((ke.shape[0], n_fn, n_fn))
    _e2 = 2 * np.arange(ke.shape[1])
    for a in range(3):
        for b in range(3):
            K[:, _e2 + a, _e2 + b] += ke[:, :, a, b]
    return K

def _sparse_from_elements(ke, dofs, n):
    '''Sum element matrices (..., 3, 3) with global dofs (..., 3) into an n x n CSR matrix.'''
    _rows = np.broadcast_to(dofs[..., :, None], ke.shape)
    _cols = np.broadcast_to(dofs[..., None, :], ke.shape)
    return coo_matrix((ke.ravel(), (_rows.ravel(), _cols.ravel())), shape=(n, n)).tocsr()

## Kinematics ##

def stretch_at_quadrature(mesh, d_c, d_f, ids=None):
    '''Total stretch F = 1 + d(u^c + u^f)/dX at the fine Gauss points of the given subdomains: (k, n_ef, nq).

    d_c is the global coarse vector; d_f holds the fine vectors of the selected subdomains only, (k, nfn).'''
    ids = _ids(mesh, ids)
    _dc_e = np.asarray(d_c)[mesh.coarse_dofs_at_quadrature[ids]]
    _grad_c = (mesh.dN_c[ids] * _dc_e[:, :, None, :]).sum(axis=-1)
    _df_e = np.asarray(d_f)[:, mesh.fine_connectivity]
    _grad_f = (mesh.dN_f[None, None] * _df_e[:, :, None, :]).sum(axis=-1)
    return 1.0 + _grad_c + _grad_f

def field_at_quadrature(mesh, x_c, x_f, ids=None):
    '''Coarse plus fine interpolant of any nodal field (displacement, velocity) at the fine Gauss points.'''
    ids = _ids(mesh, ids)
    _xc_e = np.asarray(x_c)[mesh.coarse_dofs_at_quadrature[ids]]
    _xf_e = np.asarray(x_f)[:, mesh.fine_connectivity]
    return (mesh.N_c[ids] * _xc_e[:, :, None, :]).sum(axis=-1) + (mesh.N_f[None, None] * _xf_e[:, :, None, :]).sum(axis=-1)

## Operators ##

@dataclass(eq=False)
class AssembledOperators:
    '''Mass operators of the two-scale problem. Tangents are state dependent and are built on demand by fine_tangent / coarse_tangent.'''
    M_c: object                 # consistent coarse mass, CSR
    M_c_lumped: np.ndarray      # (n_cd,)
    M_f: np.ndarray             # (n_es, nfn, nfn) consistent fine mass
    M_f_lumped: np.ndarray      # (n_es, nfn)
    M_cf: np.ndarray            # (n_es, 2 n_ecp + 1, nfn) consistent coupling mass
    gather_c_sub: np.ndarray

    @property
    def M_fc(self):
        return self.M_cf.transpose(0, 2, 1)

    def coupling_to_coarse(self, a_f):
        '''sum_alpha M^{c f_alpha} a_f[alpha] as a global coarse vector.'''
        _local = (self.M_cf * np.asarray(a_f)[:, None, :]).sum(axis=-1)
        g = np.zeros(len(self.M_c_lumped))
        np.add.at(g, self.gather_c_sub, _local)
        return g

    def coupling_to_fine(self, a_c, ids=None):
        '''M^{f_alpha c} a_c for the given subdomains: (k, nfn).'''
        ids = np.arange(self.M_cf.shape[0]) if ids is None else ids
        _a_sub = np.asarray(a_c)[self.gather_c_sub[ids]]
        return (self.M_fc[ids] * _a_sub[:, None, :]).sum(axis=-1)

def assemble_masses(mesh, material, coupling=True):
    '''Coarse, fine and coupling masses. With coupling=False the coupling blocks are zero (decoupled diagnostic mode).'''
    _rho = element_params(mesh, material).density_ratio[..., None, None]     # (n_es, n_ef, 1, 1, 1)
    _wJ = mesh.wJ_f[None, None, :, None, None]
    _Nf = mesh.N_f[None, None]

    _mf_e = (_rho * _wJ * _Nf[..., :, None] * _Nf[..., None, :]).sum(axis=2)
    M_f = _fine_matrix(_mf_e, mesh.n_fine_nodes)

    _mc_e = (_rho * _wJ * mesh.N_c[..., :, None] * mesh.N_c[..., None, :]).sum(axis=2)
    M_c = _sparse_from_elements(_mc_e, mesh.coarse_dofs_at_quadrature, mesh.n_coarse_dofs)

    M_cf = np.zeros((mesh.n_es, 2 * mesh.n_ecp + 1, mesh.n_fine_nodes))
    if coupling:
        _mcf_e = (_rho * _wJ * mesh.N_c[..., :, None] * _Nf[..., None, :]).sum(axis=2)
        _local_c = mesh.coarse_dofs_at_quadrature - mesh.gather_c_sub[:, :1, None]
        _alpha = np.arange(mesh.n_es)[:, None, None, None]
        np.add.at(M_cf, (_alpha, _local_c[..., :, None], mesh.fine_connectivity[None, :, None, :]), _mcf_e)

    return AssembledOperators(M_c, np.asarray(M_c.sum(axis=1)).ravel(), M_f, M_f.sum(axis=2), M_cf, mesh.gather_c_sub)

## Forces and tangents ##

def coarse_internal_force(mesh, material, d_c, d_f):
    F = stretch_at_quadrature(mesh, d_c, d_f)
    _ids_all = np.arange(mesh.n_es)
    P = _evaluate(mat.stress, element_params(mesh, material), F, _ids_all)
    _fe = (P[..., None] * mesh.wJ_f[None, None, :, None] * mesh.dN_c).sum(axis=2)
    f = np.zeros(mesh.n_coarse_dofs)
    np.add.at(f, mesh.coarse_dofs_at_quadrature, _fe)
    return f

def fine_internal_force(mesh, material, d_c, d_f, ids=None):
    '''Fine internal force of the given subdomains in local numbering, constrained entries included: (k, nfn). d_f rows match ids.'''
    ids = _ids(mesh, ids)
    F = stretch_at_quadrature(mesh, d_c, d_f, ids)
    P = _evaluate(mat.stress, element_params(mesh, material, ids), F, ids)
    _fe = (P[..., None] * (mesh.wJ_f[:, None] * mesh.dN_f)[None, None]).sum(axis=2)
    return _fine_vector(_fe, mesh.n_fine_nodes)

def fine_tangent(mesh, material, d_c, d_f, ids=None):
    ids = _ids(mesh, ids)
    F = stretch_at_quadrature(mesh, d_c, d_f, ids)
    D = _evaluate(mat.tangent, element_params(mesh, material, ids), F, ids)
    _BtB = (mesh.wJ_f[:, None, None] * mesh.dN_f[:, :, None] * mesh.dN_f[:, None, :])[None, None]
    _ke = (D[..., None, None] * _BtB).sum(axis=2)
    return _fine_matrix(_ke, mesh.n_fine_nodes)

def coarse_tangent(mesh, material, d_c, d_f):
    F = stretch_at_quadrature(mesh, d_c, d_f)
    D = _evaluate(mat.tangent, element_params(mesh, material), F, np.arange(mesh.n_es))
    _ke = (D[..., None, None] * mesh.wJ_f[None, None, :, None, None] * mesh.dN_c[..., :, None] * mesh.dN_c[..., None, :]).sum(axis=2)
    return _sparse_from_elements(_ke, mesh.coarse_dofs_at_quadrature, mesh.n_coarse_dofs)

def coupling_tangent(mesh, material, d_c, d_f, ids=None):
    '''d(coarse internal force)/d(fine displacement) per subdomain in local numbering: (k, 2 n_ecp + 1, nfn).'''
    ids = _ids(mesh, ids)
    F = stretch_at_quadrature(mesh, d_c, d_f, ids)
    D = _evaluate(mat.tangent, element_params(mesh, material, ids), F, ids)
    _ke = (D[..., None, None] * mesh.wJ_f[None, None, :, None, None] * mesh.dN_c[ids][..., :, None] * mesh.dN_f[None, None, :, None, :]).sum(axis=2)
    K_cf = np.zeros((len(ids), 2 * mesh.n_ecp + 1, mesh.n_fine_nodes))
    _local_c = mesh.coarse_dofs_at_quadrature[ids] - mesh.gather_c_sub[ids, :1, None]
    _k = np.arange(len(ids))[:, None, None, None]
    np.add.at(K_cf, (_k, _local_c[..., :, None], mesh.fine_connectivity[None, :, None, :]), _ke)
    return K_cf

def strain_energy(mesh, material, d_c, d_f):
    F = stretch_at_quadrature(mesh, d_c, d_f)
    psi = _evaluate(mat.energy, element_params(mesh, material), F, np.arange(mesh.n_es))
    return float((psi * mesh.wJ_f).sum())

def kinetic_energy(mesh, material, v_c, v_f):
    '''1/2 int rho (v^c + v^f)^2 dX, i.e. the consistent-mass kinetic energy of the total velocity.'''
    _v = field_at_quadrature(mesh, v_c, v_f)
    _rho = element_params(mesh, material).density_ratio
    return float((0.5 * _rho * _v * _v * mesh.wJ_f).sum())

# External forces (body force, traction) are zero in every supported problem.
def coarse_external_force(mesh, t):
    return np.zeros(mesh.n_coarse_dofs)

def fine_external_force(mesh, t, ids=None):
    return np.zeros((len(_ids(mesh, ids)), mesh.n_fine_nodes))

## Single-scale operators (DNS) ##

def line_params(mesh, material):
    _E = np.broadcast_to(np.asarray(material.modulus_ratio, dtype=float), (mesh.n_el,))
    _rho = np.broadcast_to(np.asarray(material.density_ratio, dtype=float), (mesh.n_el,))
    return mat.NeoHookeanParams(_E[:, None], _rho[:, None])

def line_stretch(mesh, d):
    _d_e = np.asarray(d)[mesh.connectivity]
    return 1.0 + (mesh.dN[None] * _d_e[:, None, :]).sum(axis=-1)

def _line_evaluate(law, params, F):
    try:
        return law(params, F)
    except mat.NonPositiveStretch as ex:
        e, q = ex.index
        raise mat.NonPositiveStretch(f'ERROR: non-positive stretch F={F[e, q]:.6g} in element {e}, quadrature point {q}.', (int(e), int(q))) from ex

def line_masses(mesh, material):
    '''Consistent (CSR) and row-sum lumped mass of the single-scale mesh.'''
    _rho = line_params(mesh, material).density_ratio[..., None, None]
    _me = (_rho * mesh.wJ[None, :, None, None] * mesh.N[None, :, :, None] * mesh.N[None, :, None, :]).sum(axis=1)
    M = _sparse_from_elements(_me, mesh.connectivity, len(mesh.nodes))
    return M, np.asarray(M.sum(axis=1)).ravel()

def line_internal_force(mesh, material, d):
    P = _line_evaluate(mat.stress, line_params(mesh, material), line_stretch(mesh, d))
    _fe = (P[..., None] * mesh.wJ[None, :, None] * mesh.dN[None]).sum(axis=1)
    f = np.zeros(len(mesh.nodes))
    np.add.at(f, mesh.connectivity, _fe)
    return f

def line_tangent(mesh, material, d):
    D = _line_evaluate(mat.tangent, line_params(mesh, material), line_stretch(mesh, d))
    _ke = (D[..., None, None] * mesh.wJ[None, :, None, None] * mesh.dN[None, :, :, None] * mesh.dN[None, :, None, :]).sum(axis=1)
    return _sparse_from_elements(_ke, mesh.connectivity, len(mesh.nodes))

def line_energy(mesh, material, d, v):
    params = line_params(mesh, material)
    psi = _line_evaluate(mat.energy, params, line_stretch(mesh, d))
    _v = (mesh.N[None] * np.asarray(v)[mesh.connectivity][:, None, :]).sum(axis=-1)
    return float((psi * mesh.wJ).sum() + (0.5 * params.density_ratio * _v * _v * mesh.wJ).sum())
