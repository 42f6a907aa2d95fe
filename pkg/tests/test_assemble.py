import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from gmsfem.assemble import (
    K_REF, M_REF, cell_values, eliminate_dirichlet, load_vector, restrict, stiffness,
    weighted_mass,
)
from gmsfem.errors import ContractError, DegenerateInputError
from gmsfem.grid import Region, build_grids

# 2x2 Gauss rule on [0, 1]^2
_G = 0.5 + np.array([-1.0, 1.0]) / (2 * np.sqrt(3.0))
_CORNERS = [(0, 0), (1, 0), (1, 1), (0, 1)]


def _shape(x, y):
    return np.array([(1 - x if a == 0 else x) * (1 - y if b == 0 else y) for a, b in _CORNERS])


def _grad(x, y):
    return np.array([[(-1 if a == 0 else 1) * (1 - y if b == 0 else y),
                      (1 - x if a == 0 else x) * (-1 if b == 0 else 1)] for a, b in _CORNERS])


def _gauss_reference():
    K = np.zeros((4, 4))
    M = np.zeros((4, 4))
    for x in _G:
        for y in _G:
            g = _grad(x, y)
            p = _shape(x, y)
            K += 0.25 * g @ g.T
            M += 0.25 * np.outer(p, p)
    return K, M


def test_reference_matrices_match_quadrature():
    K, M = _gauss_reference()
    np.testing.assert_allclose(K_REF, K, atol=1e-15)
    np.testing.assert_allclose(M_REF, M, atol=1e-15)


def test_stiffness_annihilates_constants_and_reproduces_energy():
    g = build_grids(8, 2)
    d = g.domain()
    kappa = np.linspace(1, 5, g.n_cells)
    A = stiffness(d, kappa)
    np.testing.assert_allclose(A @ np.ones(d.n_nodes), 0.0, atol=1e-12)
    x = d.node_coords[:, 0]
    # int kappa |grad x|^2 = sum kappa h^2
    assert x @ (A @ x) == pytest.approx(kappa.sum() * g.h ** 2, rel=1e-12)


def test_mass_integrates_polynomials():
    g = build_grids(6, 3)
    d = g.domain()
    M = weighted_mass(d, 1.0)
    one = np.ones(d.n_nodes)
    assert one @ (M @ one) == pytest.approx(1.0, rel=1e-13)
    x = d.node_coords[:, 0]
    assert x @ (M @ x) == pytest.approx(1.0 / 3.0, rel=1e-13)
    with pytest.raises(ContractError):
        weighted_mass(d, 0.0)


def test_load_vector_integrates_source():
    g = build_grids(6, 3)
    d = g.domain()
    b = load_vector(d, 2.0)
    assert b.sum() == pytest.approx(2.0, rel=1e-13)


def test_cell_values_accepts_local_and_global():
    g = build_grids(6, 3)
    r = Region(g, 1, 3, 1, 4)
    glob = np.arange(g.n_cells, dtype=float)
    np.testing.assert_array_equal(cell_values(r, glob), glob[r.cells])
    np.testing.assert_array_equal(cell_values(r, np.ones(r.n_cells)), 1.0)
    with pytest.raises(ContractError):
        cell_values(r, np.ones(5))


def test_region_matrix_equals_restricted_sum():
    # matrix on a sub-region equals the global one built from a kappa supported there
    g = build_grids(6, 3)
    r = Region(g, 1, 4, 2, 5)
    kappa = np.linspace(1, 2, g.n_cells)
    local = stiffness(r, kappa).toarray()
    masked = np.zeros(g.n_cells)
    masked[r.cells] = kappa[r.cells]
    glob = stiffness(g.domain(), masked + 0.0).toarray()
    np.testing.assert_allclose(restrict(glob, g.domain(), r, symmetric=True), local, atol=1e-14)


def test_restrict_rejects_non_nested():
    g = build_grids(6, 3)
    with pytest.raises(ContractError):
        restrict(np.zeros(4), Region(g, 0, 1, 0, 1), Region(g, 0, 2, 0, 2))


def test_dirichlet_elimination_recovers_bilinear_solution():
    g = build_grids(8, 4)
    d = g.domain()
    A = stiffness(d, 3.0)
    x, y = d.node_coords.T
    exact = 1 + 2 * x - y + 0.5 * x * y
    bnd = g.boundary_nodes
    sys = eliminate_dirichlet(A, np.zeros(d.n_nodes), bnd, exact[bnd])
    u = sys.recover(spla.spsolve(sys.matrix, sys.rhs))
    # bilinear harmonic functions lie in the Q1 space
    np.testing.assert_allclose(u, exact, atol=1e-12)
    with pytest.raises(DegenerateInputError):
        eliminate_dirichlet(A, np.zeros(d.n_nodes), np.arange(d.n_nodes), 0.0)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 6), scale=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
def test_assembled_matrices_are_symmetric_psd(n, scale, seed):
    g = build_grids(n, 1)
    kappa = scale * np.random.default_rng(seed).uniform(0.5, 2.0, g.n_cells)
    for M in (stiffness(g.domain(), kappa), weighted_mass(g.domain(), kappa)):
        D = M.toarray()
        np.testing.assert_allclose(D, D.T, atol=0)
        assert np.linalg.eigvalsh(D).min() >= -1e-12 * np.abs(D).max()
