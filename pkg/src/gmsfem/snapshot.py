"""
Local snapshot spaces on oversampled regions.

A snapshot space holds its functions as nodal columns over the oversampled
region ``omega_plus``; the restriction to the target neighborhood ``omega``
is an exact row selection.
"""
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .assemble import restriction_indices, stiffness, weighted_mass
from .errors import ConfigurationError, ContractError, NumericError, RangeError
from .grid import Region
from .linalg import eig_backward_error, pivoted_prune, sparse_solve

HARMONIC = "harmonic"
SPECTRAL = "spectral"

# dense generalized eigensolves up to this many nodes, shift-invert Lanczos above
DENSE_EIG_LIMIT = 300


@dataclass(frozen=True, eq=False)
class SnapshotSpace:
    region_plus: Region
    region: Region
    basis_plus: np.ndarray
    provenance: tuple
    eigenvalues: np.ndarray = field(default=None)

    @property
    def dim(self):
        return self.basis_plus.shape[1]

    @cached_property
    def rows(self):
        """Positions of the ``region`` nodes inside ``region_plus``."""
        return restriction_indices(self.region_plus, self.region)

    @cached_property
    def basis(self):
        return self.basis_plus[self.rows]


def _normalize_signs(V):
    # make the largest-magnitude entry of every column positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def harmonic_snapshots(omega_plus, kappa, omega=None, mu_index=0):
    """kappa-harmonic extensions of every boundary nodal indicator of ``omega_plus``."""
    omega = omega_plus if omega is None else omega
    bnd, inner = omega_plus.boundary, omega_plus.interior
    if inner.size == 0:
        raise ContractError(f"region {omega_plus.extents} has no interior node")
    A = stiffness(omega_plus, kappa).tocsr()
    a_ii = A[inner][:, inner]
    rhs = -A[inner][:, bnd].toarray()
    x = sparse_solve(a_ii, rhs, what="harmonic extension")
    basis = np.zeros((omega_plus.n_nodes, bnd.size))
    basis[bnd, np.arange(bnd.size)] = 1.0
    basis[inner] = x
    prov = tuple((HARMONIC, mu_index, l) for l in range(bnd.size))
    return SnapshotSpace(omega_plus, omega, basis, prov)


def local_eigenpairs(A, S, L):
    """``L`` smallest eigenpairs of ``A v = lambda S v``, S-orthonormal, ascending."""
    n = A.shape[0]
    if n <= DENSE_EIG_LIMIT:
        w, V = la.eigh(A.toarray(), S.toarray(), subset_by_index=[0, L - 1])
    else:
        w, V = spla.eigsh(A.tocsc(), k=L, M=S.tocsc(), sigma=-1.0, which="LM")
        order = np.argsort(w)
        w, V = w[order], V[:, order]
    return w, _normalize_signs(V)


def spectral_snapshots(omega_plus, kappa, weight, L, omega=None, mu_index=0):
    """First ``L`` eigenfunctions of the Neumann problem on ``omega_plus``.

    Solves ``A+ psi = lambda S+ psi`` with stiffness weighted by ``kappa``
    and mass by ``weight`` and keeps the smallest eigenvalues.
    """
    omega = omega_plus if omega is None else omega
    n = omega_plus.n_nodes
    if not 1 <= L <= n:
        raise RangeError(f"L={L} outside [1, {n}] for region {omega_plus.extents}")
    A = stiffness(omega_plus, kappa)
    S = weighted_mass(omega_plus, weight)
    w, V = local_eigenpairs(A, S, L)
    rel = float(eig_backward_error(A, S, w, V).max())
    if rel > 1e-8:
        raise NumericError(f"local eigensolve residual {rel:.2e}", rel)
    prov = tuple((SPECTRAL, mu_index, l) for l in range(L))
    return SnapshotSpace(omega_plus, omega, V, prov, w)


def merge_parameter_snapshots(spaces, tol=1e-8):
    """Concatenate snapshot spaces of one region and drop dependent columns."""
    spaces = list(spaces)
    if not spaces:
        raise ContractError("nothing to merge")
    first = spaces[0]
    for s in spaces[1:]:
        if s.region_plus != first.region_plus or s.region != first.region:
            raise ContractError("snapshot spaces live on different regions")
    X = np.hstack([s.basis_plus for s in spaces])
    prov = sum((tuple(s.provenance) for s in spaces), ())
    if all(s.eigenvalues is not None for s in spaces):
        eig = np.concatenate([s.eigenvalues for s in spaces])
    else:
        eig = None
    kept = pivoted_prune(X, tol)
    return SnapshotSpace(first.region_plus, first.region, X[:, kept],
                         tuple(prov[k] for k in kept),
                         None if eig is None else eig[kept])


_MAGIC = b"GMSFEM-SNAPSHOT 1\n"


def save_snapshots(path, space):
    """Write a snapshot space: magic line, JSON header line, column-major float64."""
    g = space.region_plus.grid
    header = {
        "version": 1,
        "n_fine": g.n_fine,
        "n_coarse": g.n_coarse,
        "region_plus": list(space.region_plus.extents),
        "region": list(space.region.extents),
        "anchor": space.region.anchor,
        "rows": int(space.basis_plus.shape[0]),
        "columns": int(space.dim),
        "provenance": [list(p) for p in space.provenance],
        "eigenvalues": None if space.eigenvalues is None else space.eigenvalues.tolist(),
    }
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(np.asfortranarray(space.basis_plus, dtype="<f8").tobytes(order="F"))


def load_snapshots(path, grid):
    with open(path, "rb") as fh:
        if fh.readline() != _MAGIC:
            raise ConfigurationError(f"{path}: not a version-1 snapshot file")
        header = json.loads(fh.readline())
        data = fh.read()
    if (header["n_fine"], header["n_coarse"]) != (grid.n_fine, grid.n_coarse):
        raise ConfigurationError(f"{path}: snapshot written for a different grid")
    rows, cols = header["rows"], header["columns"]
    basis = np.frombuffer(data, dtype="<f8").reshape((rows, cols), order="F").copy()
    anchor = header["anchor"]
    region_plus = Region(grid, *header["region_plus"], anchor=anchor)
    region = Region(grid, *header["region"], anchor=anchor)
    eig = header["eigenvalues"]
    return SnapshotSpace(region_plus, region, basis,
                         tuple(tuple(p) for p in header["provenance"]),
                         None if eig is None else np.asarray(eig))
