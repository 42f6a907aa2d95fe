"""
Q1 finite-element assembly on rectangular regions of the fine grid.

Coefficients are constant per fine cell, so every element matrix is a
scaled copy of a fixed 4x4 reference matrix and no quadrature is involved.
Local element node order is (0,0), (1,0), (1,1), (0,1).
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, DegenerateInputError

# integral of grad(phi_a).grad(phi_b) on a square cell; independent of h in 2D
K_REF = np.array([[4.0, -1.0, -2.0, -1.0],
                  [-1.0, 4.0, -1.0, -2.0],
                  [-2.0, -1.0, 4.0, -1.0],
                  [-1.0, -2.0, -1.0, 4.0]]) / 6.0

# integral of phi_a * phi_b on the unit square; scale by h^2
M_REF = np.array([[4.0, 2.0, 1.0, 2.0],
                  [2.0, 4.0, 2.0, 1.0],
                  [1.0, 2.0, 4.0, 2.0],
                  [2.0, 1.0, 2.0, 4.0]]) / 36.0


def cell_values(region, values):
    """Pick the region's cells from a global (or already local) cell array."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 0:
        return np.full(region.n_cells, float(values))
    values = values.ravel()
    if values.size == region.grid.n_cells:
        return values[region.cells]
    if values.size == region.n_cells:
        return values
    raise ContractError(
        f"cell array of length {values.size} matches neither the grid "
        f"({region.grid.n_cells}) nor the region ({region.n_cells})")


def _assemble(region, weights, ref):
    elem = region.element_nodes
    rows = np.repeat(elem, 4, axis=1).ravel()
    cols = np.tile(elem, (1, 4)).ravel()
    data = (weights[:, None] * ref.ravel()[None, :]).ravel()
    n = region.n_nodes
    return sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def stiffness(region, coeff):
    """Matrix of ``int kappa grad(phi_n) . grad(phi_m)`` over ``region``, natural BC."""
    return _assemble(region, cell_values(region, coeff), K_REF)


def weighted_mass(region, weight):
    """Matrix of ``int w phi_n phi_m`` over ``region``."""
    w = cell_values(region, weight)
    if not np.all(w > 0):
        raise ContractError("mass weight must be positive on every cell")
    return _assemble(region, w * region.grid.h ** 2, M_REF)


def load_vector(region, f):
    """Entries ``int f phi_n`` for a cellwise constant source."""
    fv = cell_values(region, f) * region.grid.h ** 2 / 4.0
    b = np.zeros(region.n_nodes)
    np.add.at(b, region.element_nodes, fv[:, None])
    return b


def restriction_indices(from_region, to_region):
    if not from_region.contains(to_region):
        raise ContractError(
            f"region {to_region.extents} is not nested in {from_region.extents}")
    return from_region.node_positions(to_region.nodes)


def restrict(obj, from_region, to_region, symmetric=False):
    """Select the rows of ``to_region`` nodes from an object living on ``from_region``.

    Vectors and basis matrices (nodes x columns) are row-selected; with
    ``symmetric=True`` a square nodal matrix is restricted on both sides.
    """
    idx = restriction_indices(from_region, to_region)
    if symmetric:
        return obj[idx][:, idx]
    return obj[idx]


@dataclass
class DirichletSystem:
    """Interior block of a system with prescribed boundary values."""

    matrix: sp.spmatrix
    rhs: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    values: np.ndarray
    size: int

    def recover(self, x_interior):
        x = np.zeros(self.size)
        x[self.boundary] = self.values
        x[self.interior] = x_interior
        return x


def eliminate_dirichlet(matrix, rhs, boundary_nodes, boundary_values):
    n = matrix.shape[0]
    boundary = np.asarray(boundary_nodes, dtype=int)
    values = np.broadcast_to(np.asarray(boundary_values, dtype=float), boundary.shape).copy()
    mask = np.ones(n, dtype=bool)
    mask[boundary] = False
    interior = np.flatnonzero(mask)
    if interior.size == 0:
        raise DegenerateInputError("every node is a Dirichlet node; nothing to solve")
    matrix = sp.csr_matrix(matrix)
    a_ii = matrix[interior][:, interior]
    a_ib = matrix[interior][:, boundary]
    b = np.asarray(rhs, dtype=float)[interior] - a_ib @ values
    return DirichletSystem(a_ii.tocsc(), b, interior, boundary, values, n)
