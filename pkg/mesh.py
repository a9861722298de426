from dataclasses import dataclass, field

import numpy as np

import solver_base as sb

'''Two-scale discretization of the domain [-1/2, 1/2]: enrichment subdomains (unit cells), a patch of quadratic coarse elements per cell and a grid of quadratic fine elements per cell.'''

DOMAIN_LENGTH = 1.0
X_LEFT = -0.5

# 3-point Gauss-Legendre rule, used for every element integral.
GAUSS_POINTS, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(3)

class InvalidDiscretization(sb.SolverException):
    pass

class PointOutsideCoarseElement(sb.SolverException):
    pass

### Quadratic element ###

def shape_values(xi):
    xi = np.asarray(xi, dtype=float)
    return np.stack([0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)], axis=-1)

def shape_parent_gradients(xi):
    xi = np.asarray(xi, dtype=float)
    return np.stack([xi - 0.5, -2.0 * xi, xi + 0.5], axis=-1)

@dataclass(frozen=True)
class QuadraticElement:
    '''Three-node element (left, mid, right) with an affine geometry map.'''
    node_coords: tuple

    @property
    def length(self):
        return self.node_coords[2] - self.node_coords[0]

    def to_physical(self, xi):
        return self.node_coords[0] + 0.5 * (np.asarray(xi) + 1.0) * self.length

    def to_parent(self, X):
        return 2.0 * (np.asarray(X) - self.node_coords[0]) / self.length - 1.0

def shape_eval(elem, xi):
    '''Return (values, gradients_X, jacobian) of the quadratic shape functions at parent coordinate xi.'''
    if np.any(np.abs(np.asarray(xi)) > 1.0 + 1e-12): raise ValueError(f'ERROR: parent coordinate {xi} outside [-1, 1].')
    jacobian = 0.5 * elem.length
    return shape_values(xi), shape_parent_gradients(xi) / jacobian, jacobian

### Boundary conditions ###

@dataclass(frozen=True)
class BoundaryConditions:
    '''Exterior ends: True = Dirichlet u=0 (Gamma^u), False = traction free (Gamma^t).'''
    left_fixed: bool = True
    right_fixed: bool = True

    @classmethod
    def from_rule(cls, rule):
        '''Build from the `boundary` config section: {left: fixed|free, right: fixed|free}.'''
        rule = rule or {}
        return cls(str(rule.get("left", "fixed")).lower() == "fixed", str(rule.get("right", "fixed")).lower() == "fixed")

### Two-scale mesh ###

@dataclass(frozen=True, eq=False)
class TwoScaleMesh:
    n_es: int
    n_ecp: int
    n_ef: int
    bc: BoundaryConditions
    coarse_nodes: np.ndarray            # (2 n_ec + 1,)
    fine_nodes: np.ndarray              # (n_es, 2 n_ef + 1)
    coarse_connectivity: np.ndarray     # (n_ec, 3) global coarse node ids
    fine_connectivity: np.ndarray       # (n_ef, 3) local fine node ids, shared by every subdomain
    gather_c_sub: np.ndarray            # (n_es, 2 n_ecp + 1) coarse dofs of each subdomain
    fine_to_coarse: np.ndarray          # (n_es, n_ef) owning coarse element of each fine element
    fine_constrained: tuple             # per subdomain: local fine nodes held at zero
    fine_free: np.ndarray               # (n_es, 2 n_ef + 1) bool
    coarse_dirichlet: np.ndarray        # constrained coarse dofs
    # quadrature tables at fine Gauss points
    xi_c: np.ndarray = field(repr=False)    # (n_es, n_ef, nq) coarse parent coordinates
    N_c: np.ndarray = field(repr=False)     # (n_es, n_ef, nq, 3)
    dN_c: np.ndarray = field(repr=False)    # (n_es, n_ef, nq, 3)
    N_f: np.ndarray = field(repr=False)     # (nq, 3)
    dN_f: np.ndarray = field(repr=False)    # (nq, 3)
    wJ_f: np.ndarray = field(repr=False)    # (nq,)

    domain_length = DOMAIN_LENGTH

    @property
    def n_ec(self):
        return self.n_es * self.n_ecp

    @property
    def cell_length(self):
        return DOMAIN_LENGTH / self.n_es

    @property
    def h_coarse(self):
        return self.cell_length / self.n_ecp

    @property
    def h_fine(self):
        return self.cell_length / self.n_ef

    @property
    def n_coarse_dofs(self):
        return len(self.coarse_nodes)

    @property
    def n_fine_nodes(self):
        return self.fine_nodes.shape[1]

    @property
    def gather_c(self):
        '''L^c_{alpha_E}: global coarse dofs of each coarse element (one dof per node in 1-D).'''
        return self.coarse_connectivity

    @property
    def gather_f(self):
        '''L^f_{alpha_e}: local fine dofs of each fine element.'''
        return self.fine_connectivity

    @property
    def coarse_dofs_at_quadrature(self):
        '''(n_es, n_ef, 3) global coarse dofs of the coarse element owning each fine element.'''
        return self.coarse_connectivity[self.fine_to_coarse]

    @property
    def fine_midpoints(self):
        '''(n_es, n_ef) midpoint coordinate of every fine element.'''
        return self.fine_nodes[:, 1::2]

    def fine_quadrature_points(self):
        '''(n_es, n_ef, nq) physical coordinates of the fine Gauss points.'''
        _left = self.fine_nodes[:, 0:-1:2]
        return _left[:, :, None] + 0.5 * (GAUSS_POINTS[None, None, :] + 1.0) * self.h_fine

    def fine_element(self, alpha, e):
        return QuadraticElement(tuple(self.fine_nodes[alpha, self.fine_connectivity[e]]))

    def coarse_element(self, E):
        return QuadraticElement(tuple(self.coarse_nodes[self.coarse_connectivity[E]]))

    def global_fine_nodes(self):
        '''All fine node coordinates with shared subdomain end nodes listed once.'''
        return np.concatenate([self.fine_nodes[0]] + [self.fine_nodes[a, 1:] for a in range(1, self.n_es)])

def build_mesh(n_es, n_ecp, n_ef, bc=None):
    bc = bc or BoundaryConditions()
    _errors = []
    if n_es < 1: _errors.append(f'n_es={n_es} must be >= 1')
    if n_ecp < 1: _errors.append(f'n_ecp={n_ecp} must be >= 1')
    if n_ef < n_ecp: _errors.append(f'n_ef={n_ef} must be >= n_ecp={n_ecp}')
    if n_ecp >= 1 and n_ef % n_ecp != 0: _errors.append(f'n_ef={n_ef} must be divisible by n_ecp={n_ecp}')
    if _errors: raise InvalidDiscretization("ERROR: " + "; ".join(_errors))

    n_ec = n_es * n_ecp
    l = DOMAIN_LENGTH / n_es

    coarse_nodes = X_LEFT + np.arange(2 * n_ec + 1) * (DOMAIN_LENGTH / (2 * n_ec))
    fine_nodes = X_LEFT + l * np.arange(n_es)[:, None] + np.arange(2 * n_ef + 1)[None, :] * (l / (2 * n_ef))
    coarse_connectivity = 2 * np.arange(n_ec)[:, None] + np.arange(3)[None, :]
    fine_connectivity = 2 * np.arange(n_ef)[:, None] + np.arange(3)[None, :]
    gather_c_sub = 2 * n_ecp * np.arange(n_es)[:, None] + np.arange(2 * n_ecp + 1)[None, :]
    fine_to_coarse = n_ecp * np.arange(n_es)[:, None] + (np.arange(n_ef) // (n_ef // n_ecp))[None, :]

    #Subdomain ends are constrained unless they sit on a traction-free exterior boundary.
    n_fn = 2 * n_ef + 1
    fine_free = np.ones((n_es, n_fn), dtype=bool)
    fine_free[:, 0] = False
    fine_free[:, -1] = False
    if not bc.left_fixed: fine_free[0, 0] = True
    if not bc.right_fixed: fine_free[-1, -1] = True
    fine_constrained = tuple(np.flatnonzero(~fine_free[a]) for a in range(n_es))

    coarse_dirichlet = np.array([d for d, fixed in ((0, bc.left_fixed), (2 * n_ec, bc.right_fixed)) if fixed], dtype=int)

    h_f = l / n_ef
    N_f = shape_values(GAUSS_POINTS)
    dN_f = shape_parent_gradients(GAUSS_POINTS) / (0.5 * h_f)
    wJ_f = GAUSS_WEIGHTS * 0.5 * h_f

    # Ownership check on the physical map; the coordinates themselves come from the nesting index.
    _map_to_coarse_parent(coarse_nodes, coarse_connectivity, fine_nodes, fine_connectivity, fine_to_coarse, GAUSS_POINTS)
    xi_c = nested_parent_coordinates(n_es, n_ecp, n_ef, GAUSS_POINTS)
    h_c = l / n_ecp
    N_c = shape_values(xi_c)
    dN_c = shape_parent_gradients(xi_c) / (0.5 * h_c)

    return TwoScaleMesh(n_es, n_ecp, n_ef, bc, coarse_nodes, fine_nodes, coarse_connectivity, fine_connectivity,
                        gather_c_sub, fine_to_coarse, fine_constrained, fine_free, coarse_dirichlet,
                        xi_c, N_c, dN_c, N_f, dN_f, wJ_f)

def _map_to_coarse_parent(coarse_nodes, coarse_connectivity, fine_nodes, fine_connectivity, fine_to_coarse, xi_f):
    '''xi_c = M_c^-1(M_f(xi_f)) for every fine element of every subdomain; xi_f broadcasts on the last axis.'''
    _f_left = fine_nodes[:, fine_connectivity[:, 0]]
    _f_right = fine_nodes[:, fine_connectivity[:, 2]]
    X = _f_left[..., None] + 0.5 * (np.asarray(xi_f) + 1.0) * (_f_right - _f_left)[..., None]
    _c_left = coarse_nodes[coarse_connectivity[fine_to_coarse, 0]]
    _c_right = coarse_nodes[coarse_connectivity[fine_to_coarse, 2]]
    xi_c = 2.0 * (X - _c_left[..., None]) / (_c_right - _c_left)[..., None] - 1.0
    if np.any(np.abs(xi_c) > 1.0 + 1e-12):
        raise PointOutsideCoarseElement("ERROR: a fine-scale point maps outside its owning coarse element.")
    return np.clip(xi_c, -1.0, 1.0)

def nested_parent_coordinates(n_es, n_ecp, n_ef, xi_f):
    '''Coarse parent coordinates of fine parent points from the nesting index alone: (n_es, n_ef, len(xi_f)).

    Fine element j of the m = n_ef/n_ecp inside a coarse element covers [-1 + 2j/m, -1 + 2(j+1)/m] of the coarse parent, so
    xi_c = (xi_f + 2j + 1 - m)/m. With m = 1 this returns xi_f bit for bit.'''
    m = n_ef // n_ecp
    _shift = (2 * (np.arange(n_ef) % m) + 1 - m).astype(float)
    xi_c = (np.asarray(xi_f)[None, :] + _shift[:, None]) / float(m)
    return np.broadcast_to(xi_c, (n_es,) + xi_c.shape).copy()

def map_fine_to_coarse_parent(mesh, alpha_e, xi_f):
    '''Map a point of fine element alpha_e (global id alpha*n_ef + e) to (owning coarse element, coarse parent coordinate).'''
    alpha, e = divmod(int(alpha_e), mesh.n_ef)
    if not (0 <= alpha < mesh.n_es): raise ValueError(f'ERROR: fine element id {alpha_e} out of range.')
    E = int(mesh.fine_to_coarse[alpha, e])
    X = mesh.fine_element(alpha, e).to_physical(xi_f)
    xi_c = mesh.coarse_element(E).to_parent(X)
    if np.any(np.abs(xi_c) > 1.0 + 1e-12):
        raise PointOutsideCoarseElement(f'ERROR: point X={X} of fine element {alpha_e} is outside coarse element {E}.')
    return E, xi_c

### Single-scale mesh (DNS) ###

@dataclass(frozen=True, eq=False)
class LineMesh:
    n_el: int
    bc: BoundaryConditions
    nodes: np.ndarray           # (2 n_el + 1,)
    connectivity: np.ndarray    # (n_el, 3)
    dirichlet: np.ndarray
    N: np.ndarray = field(repr=False)      # (nq, 3)
    dN: np.ndarray = field(repr=False)     # (nq, 3)
    wJ: np.ndarray = field(repr=False)     # (nq,)

    @property
    def h(self):
        return DOMAIN_LENGTH / self.n_el

    @property
    def midpoints(self):
        return self.nodes[1::2]

def build_line_mesh(n_el, bc=None):
    bc = bc or BoundaryConditions()
    if n_el < 1: raise InvalidDiscretization(f'ERROR: n_el={n_el} must be >= 1')
    h = DOMAIN_LENGTH / n_el
    nodes = X_LEFT + np.arange(2 * n_el + 1) * (DOMAIN_LENGTH / (2 * n_el))
    connectivity = 2 * np.arange(n_el)[:, None] + np.arange(3)[None, :]
    dirichlet = np.array([d for d, fixed in ((0, bc.left_fixed), (2 * n_el, bc.right_fixed)) if fixed], dtype=int)
    return LineMesh(n_el, bc, nodes, connectivity, dirichlet,
                    shape_values(GAUSS_POINTS), shape_parent_gradients(GAUSS_POINTS) / (0.5 * h), GAUSS_WEIGHTS * 0.5 * h)
