"""
Global coupling of local spaces through the partition of unity.

Coarse degrees of freedom sit on interior coarse vertices only. Dirichlet
data enters through the lifting ``u_g = sum_b g(x_b) chi_b`` over boundary
coarse vertices, so every trial function ``u_g + R c`` carries the bilinear
coarse interpolant of ``g`` on the domain boundary.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assemble import eliminate_dirichlet, load_vector, stiffness
from .errors import ContractError
from .grid import build_partition
from .linalg import check_residual, dense_spd_solve, ordered_orthonormalize, sparse_solve

# coarse systems up to this size are factored densely
DENSE_COARSE_LIMIT = 3000
# relative diagonal shift of the unit-diagonal coarse matrix
COARSE_SHIFT = 1e-13


@dataclass
class MultiscaleOperator:
    """Prolongation ``R`` (fine nodes x coarse dofs) and boundary lifting.

    ``keys[c] = (vertex, local index)`` names the local column behind
    coarse dof ``c``; local indices refer to the input basis columns.
    """

    grid: object
    R: sp.csr_matrix
    keys: list
    lifting: np.ndarray

    @property
    def dim(self):
        return self.R.shape[1]

    def dofs_per_vertex(self):
        out = {}
        for v, _ in self.keys:
            out[v] = out.get(v, 0) + 1
        return out


def _local_basis(space):
    # accept a reduced/snapshot space (``basis`` over omega) or a plain array
    B = np.asarray(getattr(space, "basis", space), dtype=float)
    full = getattr(space, "basis_plus", None)
    scale = np.linalg.norm(B if full is None else full, axis=0)
    return B, scale


def linear_boundary(a=0.0, bx=1.0, by=0.0):
    """Boundary data ``g(x, y) = a + bx x + by y``."""
    return lambda x, y: a + bx * np.asarray(x) + by * np.asarray(y)


def boundary_lifting(grid, boundary_fn, pou=None):
    pou = build_partition(grid) if pou is None else pou
    xy = grid.vertex_coords
    u = np.zeros(grid.n_nodes)
    for b in grid.boundary_vertices:
        e = pou.entries[int(b)]
        u[e.region.nodes] += float(boundary_fn(*xy[b])) * e.values
    return u


def build_operator(grid, local_bases, boundary_fn=None, pou=None, prune_tol=1e-8):
    """Assemble the global multiscale prolongation.

    Parameters
    ----------
    local_bases : dict
        ``vertex -> basis`` for every interior coarse vertex; a basis is an
        array (omega nodes x M) or any object with a ``basis`` attribute.
    boundary_fn : callable, optional
        Dirichlet data ``g(x, y)``; zero when omitted.
    prune_tol : float
        A column ``chi_i psi`` is dropped when its part orthogonal to the
        earlier columns of the same vertex is below ``prune_tol`` times the
        norm of ``psi`` over its full (oversampled) support. Earlier columns
        are never affected by later ones, so nested local bases yield nested
        global spaces.
    """
    pou = build_partition(grid) if pou is None else pou
    rows, cols, data, keys = [], [], [], []
    ncol = 0
    for v in grid.interior_vertices:
        v = int(v)
        if v not in local_bases:
            raise ContractError(f"no local basis for interior coarse vertex {v}")
        e = pou.entries[v]
        B, scale = _local_basis(local_bases[v])
        if B.ndim != 2 or B.shape[0] != e.region.n_nodes:
            raise ContractError(
                f"basis of vertex {v} has shape {B.shape}, expected "
                f"({e.region.n_nodes}, M)")
        X = e.values[:, None] * B
        idx, Q = ordered_orthonormalize(X, prune_tol * scale)
        nz = np.abs(Q) > 0
        r, c = np.nonzero(nz)
        rows.append(e.region.nodes[r])
        cols.append(c + ncol)
        data.append(Q[nz])
        keys.extend((v, int(k)) for k in idx)
        ncol += Q.shape[1]
    if rows:
        R = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(grid.n_nodes, ncol))
    else:
        R = sp.csr_matrix((grid.n_nodes, 0))
    lift = np.zeros(grid.n_nodes) if boundary_fn is None else boundary_lifting(grid, boundary_fn, pou)
    return MultiscaleOperator(grid, R, keys, lift)


def fine_system(grid, kappa, f):
    domain = grid.domain()
    return stiffness(domain, kappa), load_vector(domain, f)


def solve_coarse(operator, kappa, f=0.0, system=None):
    """Galerkin solve in ``u_g + span(R)``; returns the fine-node field."""
    A, b = fine_system(operator.grid, kappa, f) if system is None else system
    R, ug = operator.R, operator.lifting
    if operator.dim == 0:
        return ug.copy()
    K = sp.csr_matrix(R.T @ (A @ R))
    K = 0.5 * (K + K.T)
    rhs = R.T @ (b - A @ ug)
    # columns of different vertices can be exactly dependent; the scaled and
    # slightly shifted system picks a bounded solution among the equivalent ones
    d = np.sqrt(K.diagonal())
    d[d == 0] = 1.0
    Dinv = sp.diags(1.0 / d)
    Ks = Dinv @ K @ Dinv + COARSE_SHIFT * sp.identity(K.shape[0])
    if operator.dim <= DENSE_COARSE_LIMIT:
        cs = dense_spd_solve(Ks.toarray(), rhs / d)
    else:
        cs = sparse_solve(Ks, rhs / d, what="coarse solve", backward=True)
    c = cs / d
    check_residual(K, c, rhs, 1e-9, "coarse solve", backward=True)
    return R @ c + ug


def solve_fine(grid, kappa, f=0.0, boundary_fn=None):
    """Reference solve on the full fine grid with Dirichlet data on every boundary node."""
    A, b = fine_system(grid, kappa, f)
    bnd = grid.boundary_nodes
    if boundary_fn is None:
        g = np.zeros(bnd.size)
    else:
        xy = grid.node_coords[bnd]
        g = np.asarray(boundary_fn(xy[:, 0], xy[:, 1]), dtype=float)
    system = eliminate_dirichlet(A, b, bnd, g)
    x = sparse_solve(system.matrix, system.rhs, what="fine solve")
    return system.recover(x)


def solve_snapshot_reference(operator, kappa, f=0.0, system=None):
    """Galerkin solve in the untruncated snapshot space (``operator`` built from it)."""
    return solve_coarse(operator, kappa, f, system)


def coarse_matrix(operator, kappa):
    A = stiffness(operator.grid.domain(), kappa)
    K = (operator.R.T @ (A @ operator.R)).toarray()
    return 0.5 * (K + K.T)

