import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmsfem.errors import ConfigurationError, ContractError, RangeError
from gmsfem.grid import (
    CoarseLayers, FineLayers, Region, build_grids, build_partition, neighborhood,
    oversample, partition_of_unity,
)


def test_grid_counts():
    g = build_grids(100, 10)
    assert g.ratio == 10
    assert g.n_nodes == 101 ** 2
    assert g.n_cells == 100 ** 2
    assert g.n_vertices == 121
    assert len(g.interior_vertices) == 81
    assert len(g.boundary_vertices) == 40


def test_indivisible_sizes_name_both_values():
    with pytest.raises(ConfigurationError) as exc:
        build_grids(80, 7)
    assert "80" in str(exc.value) and "7" in str(exc.value)
    with pytest.raises(ConfigurationError):
        build_grids(0, 1)


def test_vertex_out_of_range():
    g = build_grids(8, 2)
    with pytest.raises(RangeError):
        g.vertex_ij(9)


def test_node_ordering_is_x_fastest():
    g = build_grids(4, 2)
    assert g.node_index(1, 0) == 1
    assert g.node_index(0, 1) == 5
    np.testing.assert_allclose(g.node_coords[6], [0.25, 0.25])
    assert g.vertex_node(4) == g.node_index(2, 2)


def test_neighborhood_sizes():
    g = build_grids(100, 10)
    inner = neighborhood(g, 5 * 11 + 5)
    assert (inner.nx, inner.ny) == (20, 20)
    corner = neighborhood(g, 0)
    assert corner.extents == (0, 10, 0, 10)
    edge = neighborhood(g, 5)
    assert (edge.nx, edge.ny) == (20, 10)


def test_oversampling_sizes():
    g = build_grids(100, 10)
    omega = neighborhood(g, 5 * 11 + 5)
    assert (oversample(g, omega, CoarseLayers(1)).nx, oversample(g, omega, CoarseLayers(1)).ny) == (40, 40)
    plus1 = oversample(g, omega, FineLayers(1))
    assert (plus1.nx, plus1.ny) == (22, 22)
    # clipped at the domain
    near = oversample(g, neighborhood(g, 12), CoarseLayers(1))
    assert near.x0 == 0 and near.y0 == 0 and near.x1 == 30
    assert oversample(g, omega, FineLayers(0)) == omega


def test_region_rejects_bad_extents():
    g = build_grids(4, 2)
    with pytest.raises(ContractError):
        Region(g, 2, 2, 0, 1)
    with pytest.raises(ContractError):
        Region(g, 0, 5, 0, 1)


def test_region_nodes_and_boundary():
    g = build_grids(6, 3)
    r = Region(g, 1, 4, 2, 4)
    assert r.n_nodes == 4 * 3
    assert r.n_cells == 6
    assert r.boundary.size == 2 * 4 + 2 * 1
    assert r.interior.size == 2
    # local order coincides with sorted global order
    assert np.all(np.diff(r.nodes) > 0)
    assert np.all(np.diff(r.cells) > 0)
    np.testing.assert_array_equal(r.node_positions(r.nodes[[0, 5]]), [0, 5])
    with pytest.raises(ContractError):
        r.node_positions([0])


def test_element_nodes_counter_clockwise():
    g = build_grids(4, 2)
    r = Region(g, 0, 2, 0, 1)
    xy = r.node_coords[r.element_nodes[0]]
    np.testing.assert_allclose(xy, [[0, 0], [0.25, 0], [0.25, 0.25], [0, 0.25]])


def test_pou_values_on_neighborhood():
    g = build_grids(12, 3)
    i = 5
    e = partition_of_unity(g, i, neighborhood(g, i))
    assert e.values.min() >= 0.0
    k = e.region.node_positions([g.vertex_node(i)])[0]
    assert e.values[k] == 1.0
    np.testing.assert_array_equal(e.values[e.region.boundary], 0.0)


def test_pou_sums_to_one():
    g = build_grids(12, 3)
    pou = build_partition(g)
    np.testing.assert_allclose(pou.sum_values(), 1.0, atol=1e-12)


def test_pou_boundary_vertex_is_one_sided():
    g = build_grids(12, 3)
    e = partition_of_unity(g, 0, neighborhood(g, 0))
    # value 1 - x/H along the bottom edge
    ix, iy = e.region.node_ij
    bottom = iy == 0
    np.testing.assert_allclose(e.values[bottom], 1.0 - ix[bottom] / 4.0)


def test_pou_plus_vanishes_on_outer_boundary():
    g = build_grids(12, 3)
    pou = build_partition(g, CoarseLayers(1))
    for i, e in pou.entries_plus.items():
        r = e.region
        ix, iy = r.node_ij
        on_domain = (ix == 0) | (ix == 12) | (iy == 0) | (iy == 12)
        b = r.boundary[~on_domain[r.boundary]]
        np.testing.assert_array_equal(e.values[b], 0.0)
        assert np.isfinite(pou.gradient_constant(i))


def test_pou_weight_is_two_at_coarse_cell_centre():
    # odd ratio: the middle fine cell centre coincides with the coarse cell centre
    g = build_grids(9, 3)
    w = build_partition(g).weight_sum()
    centre = 4 * 9 + 4
    assert w[centre] == pytest.approx(2.0, abs=1e-12)


def test_pou_weight_matches_closed_form():
    # sum over the four hats of a coarse cell of H^2 |grad chi|^2 = 2[(1-t)^2 + t^2 + (1-s)^2 + s^2]
    g = build_grids(12, 3)
    w = build_partition(g).weight_sum()
    xy = g.cell_centers
    t = (xy[:, 0] * 3) % 1.0
    s = (xy[:, 1] * 3) % 1.0
    expected = 2 * ((1 - t) ** 2 + t ** 2) + 2 * ((1 - s) ** 2 + s ** 2)
    np.testing.assert_allclose(w, expected, rtol=1e-12)


def test_pou_rejects_region_without_vertex():
    g = build_grids(12, 3)
    with pytest.raises(ContractError):
        partition_of_unity(g, 0, neighborhood(g, 15))


@settings(max_examples=30, deadline=None)
@given(n_coarse=st.integers(1, 5), ratio=st.integers(1, 5),
       layers=st.sampled_from([None, CoarseLayers(1), FineLayers(1), FineLayers(3)]))
def test_pou_partition_property(n_coarse, ratio, layers):
    g = build_grids(n_coarse * ratio, n_coarse)
    pou = build_partition(g, layers)
    np.testing.assert_allclose(pou.sum_values(), 1.0, atol=1e-12)
    for i, e in pou.entries.items():
        assert e.values.min() >= 0.0
        assert e.values.max() <= 1.0 + 1e-15
        if layers is not None:
            assert pou.entries_plus[i].region.contains(e.region)
