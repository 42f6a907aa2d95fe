import numpy as np
import pytest

from gmsfem.assemble import stiffness, weighted_mass
from gmsfem.coeff import generate_field
from gmsfem.errors import ConfigurationError, ContractError, RangeError
from gmsfem.grid import CoarseLayers, FineLayers, Region, build_grids, neighborhood, oversample
from gmsfem.snapshot import (
    DENSE_EIG_LIMIT, harmonic_snapshots, load_snapshots, merge_parameter_snapshots,
    save_snapshots, spectral_snapshots,
)


def test_neumann_spectrum_of_unit_square():
    g = build_grids(32, 1)
    s = spectral_snapshots(g.domain(), 1.0, 1.0, 4)
    assert abs(s.eigenvalues[0]) < 1e-10
    assert s.eigenvalues[1] == pytest.approx(np.pi ** 2, rel=0.05)
    assert s.eigenvalues[2] == pytest.approx(np.pi ** 2, rel=0.05)
    assert s.eigenvalues[3] == pytest.approx(2 * np.pi ** 2, rel=0.05)


@pytest.mark.parametrize("n", [8, 24])
def test_spectral_pairs_satisfy_literal_residual(n):
    # both the dense path (n=8) and the shift-invert path (n=24) are exercised
    g = build_grids(n, 1)
    d = g.domain()
    assert (d.n_nodes <= DENSE_EIG_LIMIT) == (n == 8)
    kappa = generate_field("channels", n, {"n_strips": 2, "width": 1, "contrast": 1e4}, seed=3)
    s = spectral_snapshots(d, kappa, kappa, 10)
    A, S = stiffness(d, kappa), weighted_mass(d, kappa)
    lam, V = s.eigenvalues, s.basis_plus
    assert np.all(np.diff(lam) >= 0)
    np.testing.assert_allclose(V.T @ (S @ V), np.eye(10), atol=1e-8)
    for k in np.flatnonzero(lam > 1e-8 * lam.max()):
        r = np.linalg.norm(A @ V[:, k] - lam[k] * (S @ V[:, k]))
        den = np.linalg.norm(A @ V[:, k]) + lam[k] * np.linalg.norm(S @ V[:, k])
        assert r / den < 1e-8


def test_spectral_rejects_bad_count():
    g = build_grids(4, 1)
    with pytest.raises(RangeError):
        spectral_snapshots(g.domain(), 1.0, 1.0, 0)
    with pytest.raises(RangeError):
        spectral_snapshots(g.domain(), 1.0, 1.0, 26)


def test_harmonic_snapshots_interpolate_indicators():
    g = build_grids(12, 3)
    kappa = generate_field("channels", 12, {"n_strips": 2, "width": 1}, seed=0)
    omega = neighborhood(g, 5)
    plus = oversample(g, omega, FineLayers(1))
    s = harmonic_snapshots(plus, kappa, omega)
    bnd, inner = plus.boundary, plus.interior
    assert s.dim == bnd.size
    np.testing.assert_array_equal(s.basis_plus[bnd], np.eye(bnd.size))
    A = stiffness(plus, kappa)
    res = (A @ s.basis_plus)[inner]
    assert np.abs(res).max() < 1e-10 * abs(A).max()
    # the columns add up to the constant function
    np.testing.assert_allclose(s.basis_plus.sum(axis=1), 1.0, atol=1e-10)
    assert s.basis.shape == (omega.n_nodes, bnd.size)
    assert s.provenance[3] == ("harmonic", 0, 3)


def test_harmonic_needs_interior():
    g = build_grids(2, 2)
    with pytest.raises(ContractError):
        harmonic_snapshots(Region(g, 0, 1, 0, 1), 1.0)


def test_merge_drops_duplicates():
    g = build_grids(12, 3)
    omega = neighborhood(g, 5)
    plus = oversample(g, omega, CoarseLayers(1))
    k1 = generate_field("channels", 12, {"n_strips": 2, "width": 1}, seed=0)
    a = spectral_snapshots(plus, k1, k1, 6, omega, mu_index=0)
    b = spectral_snapshots(plus, k1, k1, 6, omega, mu_index=1)
    c = spectral_snapshots(plus, 2 * k1 + 1, k1, 6, omega, mu_index=2)
    m = merge_parameter_snapshots([a, b])
    assert m.dim == 6
    assert [p[1] for p in m.provenance] == [0] * 6
    m2 = merge_parameter_snapshots([a, c])
    assert 6 < m2.dim <= 12
    with pytest.raises(ContractError):
        merge_parameter_snapshots([])
    other = spectral_snapshots(omega, k1, k1, 3)
    with pytest.raises(ContractError):
        merge_parameter_snapshots([a, other])


def test_snapshot_file_round_trip(tmp_path):
    g = build_grids(12, 3)
    omega = neighborhood(g, 6)
    plus = oversample(g, omega, CoarseLayers(1))
    s = spectral_snapshots(plus, 1.0, 1.0, 5, omega)
    path = tmp_path / "s.bin"
    save_snapshots(path, s)
    t = load_snapshots(path, g)
    assert t.region == s.region and t.region_plus == s.region_plus
    np.testing.assert_array_equal(t.basis_plus, s.basis_plus)
    np.testing.assert_array_equal(t.eigenvalues, s.eigenvalues)
    assert t.provenance == s.provenance
    with pytest.raises(ConfigurationError):
        load_snapshots(path, build_grids(24, 3))
    (tmp_path / "junk").write_bytes(b"nope\n")
    with pytest.raises(ConfigurationError):
        load_snapshots(tmp_path / "junk", g)
