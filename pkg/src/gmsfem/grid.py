"""
Nested uniform fine/coarse quadrilateral grids on the unit square.

Node ordering is lexicographic with x running fastest, both globally and
inside every rectangular region, so the sorted global node indices of a
region coincide with its local ordering.

Index conventions
-----------------
fine node ``(ix, iy)``   -> ``iy * (n_fine + 1) + ix``
fine cell ``(cx, cy)``   -> ``cy * n_fine + cx``
coarse vertex ``(I, J)`` -> ``J * (n_coarse + 1) + I``, located at fine
node ``(I * ratio, J * ratio)``.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, ContractError, RangeError


@dataclass(frozen=True)
class GridHierarchy:
    n_fine: int
    n_coarse: int

    @property
    def ratio(self):
        """Fine cells per coarse cell along one side."""
        return self.n_fine // self.n_coarse

    @property
    def h(self):
        return 1.0 / self.n_fine

    @property
    def H(self):
        return 1.0 / self.n_coarse

    @property
    def n_nodes(self):
        return (self.n_fine + 1) ** 2

    @property
    def n_cells(self):
        return self.n_fine ** 2

    @property
    def n_vertices(self):
        return (self.n_coarse + 1) ** 2

    def node_index(self, ix, iy):
        return np.asarray(iy) * (self.n_fine + 1) + np.asarray(ix)

    def vertex_ij(self, i):
        if not 0 <= i < self.n_vertices:
            raise RangeError(
                f"coarse vertex {i} out of range [0, {self.n_vertices})")
        return i % (self.n_coarse + 1), i // (self.n_coarse + 1)

    def vertex_node(self, i):
        I, J = self.vertex_ij(i)
        return int(self.node_index(I * self.ratio, J * self.ratio))

    @cached_property
    def node_coords(self):
        t = np.linspace(0.0, 1.0, self.n_fine + 1)
        X, Y = np.meshgrid(t, t)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def vertex_coords(self):
        t = np.linspace(0.0, 1.0, self.n_coarse + 1)
        X, Y = np.meshgrid(t, t)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def cell_centers(self):
        t = (np.arange(self.n_fine) + 0.5) * self.h
        X, Y = np.meshgrid(t, t)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def interior_vertices(self):
        N = self.n_coarse
        I, J = np.meshgrid(np.arange(1, N), np.arange(1, N))
        return (J * (N + 1) + I).ravel()

    @cached_property
    def boundary_vertices(self):
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.interior_vertices] = False
        return np.flatnonzero(mask)

    @cached_property
    def boundary_nodes(self):
        n = self.n_fine
        iy, ix = np.divmod(np.arange(self.n_nodes), n + 1)
        on = (ix == 0) | (ix == n) | (iy == 0) | (iy == n)
        return np.flatnonzero(on)

    def coarse_cell_cells(self, k):
        """Global fine-cell indices making up coarse cell ``k``."""
        N, m = self.n_coarse, self.ratio
        if not 0 <= k < N * N:
            raise RangeError(f"coarse cell {k} out of range [0, {N * N})")
        KJ, KI = divmod(k, N)
        return Region(self, KI * m, (KI + 1) * m, KJ * m, (KJ + 1) * m).cells

    def domain(self):
        return Region(self, 0, self.n_fine, 0, self.n_fine)


def build_grids(n_fine, n_coarse):
    """Return the two-level grid with ``n_fine`` and ``n_coarse`` cells per side."""
    if int(n_fine) != n_fine or int(n_coarse) != n_coarse:
        raise ConfigurationError(
            f"grid sizes must be integers, got n_fine={n_fine}, n_coarse={n_coarse}")
    n_fine, n_coarse = int(n_fine), int(n_coarse)
    if n_fine < 1 or n_coarse < 1:
        raise ConfigurationError(
            f"grid sizes must be >= 1, got n_fine={n_fine}, n_coarse={n_coarse}")
    if n_fine % n_coarse:
        raise ConfigurationError(
            f"n_fine={n_fine} is not divisible by n_coarse={n_coarse}")
    return GridHierarchy(n_fine, n_coarse)


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle of fine cells ``[x0, x1) x [y0, y1)``.

    Node coordinates run over ``x0..x1`` and ``y0..y1`` inclusive.
    ``anchor`` is the coarse vertex the region was built around, if any.
    """

    grid: GridHierarchy
    x0: int
    x1: int
    y0: int
    y1: int
    anchor: int = field(default=None, compare=False)

    def __post_init__(self):
        n = self.grid.n_fine
        if not (0 <= self.x0 < self.x1 <= n and 0 <= self.y0 < self.y1 <= n):
            raise ContractError(
                f"region [{self.x0},{self.x1})x[{self.y0},{self.y1}) "
                f"does not fit a {n}x{n} grid")

    @property
    def extents(self):
        return (self.x0, self.x1, self.y0, self.y1)

    @property
    def nx(self):
        return self.x1 - self.x0

    @property
    def ny(self):
        return self.y1 - self.y0

    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.ny + 1)

    @cached_property
    def cells(self):
        cx, cy = np.meshgrid(np.arange(self.x0, self.x1), np.arange(self.y0, self.y1))
        return (cy * self.grid.n_fine + cx).ravel()

    @cached_property
    def node_ij(self):
        ix, iy = np.meshgrid(np.arange(self.x0, self.x1 + 1), np.arange(self.y0, self.y1 + 1))
        return ix.ravel(), iy.ravel()

    @cached_property
    def nodes(self):
        ix, iy = self.node_ij
        return self.grid.node_index(ix, iy)

    @cached_property
    def node_coords(self):
        ix, iy = self.node_ij
        return np.column_stack([ix * self.grid.h, iy * self.grid.h])

    @cached_property
    def boundary(self):
        """Local indices of nodes on the rectangle boundary."""
        ix, iy = self.node_ij
        on = (ix == self.x0) | (ix == self.x1) | (iy == self.y0) | (iy == self.y1)
        return np.flatnonzero(on)

    @cached_property
    def boundary_on_domain(self):
        """Mask over ``boundary``: True where the node also lies on the domain boundary."""
        n = self.grid.n_fine
        ix, iy = self.node_ij
        ix, iy = ix[self.boundary], iy[self.boundary]
        return (ix == 0) | (ix == n) | (iy == 0) | (iy == n)

    @cached_property
    def interior(self):
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary] = False
        return np.flatnonzero(mask)

    @cached_property
    def element_nodes(self):
        """(n_cells, 4) local node indices, counter-clockwise from lower left."""
        cx, cy = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        cx, cy = cx.ravel(), cy.ravel()
        w = self.nx + 1
        ll = cy * w + cx
        return np.column_stack([ll, ll + 1, ll + w + 1, ll + w])

    def contains(self, other):
        return (other.grid == self.grid and self.x0 <= other.x0 and other.x1 <= self.x1
                and self.y0 <= other.y0 and other.y1 <= self.y1)

    def node_positions(self, global_nodes):
        """Local positions of ``global_nodes``; raises if any is absent."""
        global_nodes = np.asarray(global_nodes)
        pos = np.searchsorted(self.nodes, global_nodes)
        pos = np.minimum(pos, self.n_nodes - 1)
        if not np.array_equal(self.nodes[pos], global_nodes):
            raise ContractError("node set is not contained in the region")
        return pos

    def cell_positions(self, global_cells):
        global_cells = np.asarray(global_cells)
        pos = np.searchsorted(self.cells, global_cells)
        pos = np.minimum(pos, self.n_cells - 1)
        if not np.array_equal(self.cells[pos], global_cells):
            raise ContractError("cell set is not contained in the region")
        return pos


def neighborhood(grid, i):
    """Union of the coarse cells whose closure contains coarse vertex ``i``."""
    I, J = grid.vertex_ij(i)
    N, m = grid.n_coarse, grid.ratio
    return Region(grid, max(I - 1, 0) * m, min(I + 1, N) * m,
                  max(J - 1, 0) * m, min(J + 1, N) * m, anchor=i)


@dataclass(frozen=True)
class CoarseLayers:
    k: int

    def width(self, grid):
        return self.k * grid.ratio

    def __str__(self):
        return f"coarse_layers={self.k}"


@dataclass(frozen=True)
class FineLayers:
    m: int

    def width(self, grid):
        return self.m

    def __str__(self):
        return f"fine_layers={self.m}"


def oversample(grid, region, spec):
    """Grow ``region`` by ``spec`` layers on every side, clipped to the domain."""
    w = spec.width(grid)
    if w < 0:
        raise ContractError(f"negative oversampling width {w}")
    n = grid.n_fine
    return Region(grid, max(region.x0 - w, 0), min(region.x1 + w, n),
                  max(region.y0 - w, 0), min(region.y1 + w, n), anchor=region.anchor)


@dataclass(frozen=True)
class PouEntry:
    vertex: int
    region: Region
    values: np.ndarray
    grad2: np.ndarray


def _hat_1d(lo, c, hi, t):
    """Piecewise linear 1 at ``c``, 0 at ``lo``/``hi`` (in fine index units).

    Returns value and slope d/dt. A side of zero length is dropped, so a hat
    anchored on the domain boundary is one-sided.
    """
    t = np.asarray(t, dtype=float)
    val = np.zeros_like(t)
    slope = np.zeros_like(t)
    left = t <= c
    if c > lo:
        val[left] = (t[left] - lo) / (c - lo)
        slope[left & (t < c)] = 1.0 / (c - lo)
    else:
        val[left] = 1.0
    right = t > c
    if hi > c:
        val[right] = (hi - t[right]) / (hi - c)
        slope[right] = -1.0 / (hi - c)
    return val, slope


def partition_of_unity(grid, i, region):
    """Tensor-product hat of vertex ``i`` scaled to ``region``.

    On the neighborhood of ``i`` this is the standard bilinear nodal
    function; on an oversampled region it vanishes on every region edge not
    passing through the vertex. ``grad2`` is |grad chi|^2 at fine-cell
    centres (physical units).
    """
    I, J = grid.vertex_ij(i)
    xi, yi = I * grid.ratio, J * grid.ratio
    if not (region.x0 <= xi <= region.x1 and region.y0 <= yi <= region.y1):
        raise ContractError(f"region {region.extents} does not contain vertex {i}")
    ix, iy = region.node_ij
    vx, _ = _hat_1d(region.x0, xi, region.x1, ix)
    vy, _ = _hat_1d(region.y0, yi, region.y1, iy)

    tx = np.arange(region.x0, region.x1) + 0.5
    ty = np.arange(region.y0, region.y1) + 0.5
    cx, sx = _hat_1d(region.x0, xi, region.x1, tx)
    cy, sy = _hat_1d(region.y0, yi, region.y1, ty)
    gx = np.outer(cy, sx) / grid.h
    gy = np.outer(sy, cx) / grid.h
    return PouEntry(i, region, vx * vy, (gx ** 2 + gy ** 2).ravel())


class PartitionOfUnity:
    """Hats for every coarse vertex on its neighborhood and, optionally, on
    its oversampled region."""

    def __init__(self, grid, oversampling=None):
        self.grid = grid
        self.oversampling = oversampling
        self.entries = {}
        self.entries_plus = {}
        for i in range(grid.n_vertices):
            omega = neighborhood(grid, i)
            self.entries[i] = partition_of_unity(grid, i, omega)
            if oversampling is not None:
                self.entries_plus[i] = partition_of_unity(
                    grid, i, oversample(grid, omega, oversampling))

    def sum_values(self):
        total = np.zeros(self.grid.n_nodes)
        for e in self.entries.values():
            np.add.at(total, e.region.nodes, e.values)
        return total

    def weight_sum(self):
        """Cellwise sum over vertices of H^2 |grad chi_i|^2."""
        total = np.zeros(self.grid.n_cells)
        for e in self.entries.values():
            np.add.at(total, e.region.cells, e.grad2)
        return total * self.grid.H ** 2

    def gradient_constant(self, i):
        """Smallest C with |grad chi_i|^2 <= C |grad chi_i^+|^2 on the cells of omega_i."""
        if not self.entries_plus:
            raise ContractError("partition built without oversampling")
        e, ep = self.entries[i], self.entries_plus[i]
        g_plus = ep.grad2[ep.region.cell_positions(e.region.cells)]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(e.grad2 > 0, e.grad2 / g_plus, 0.0)
        return float(ratio.max())


def build_partition(grid, oversampling=None):
    return PartitionOfUnity(grid, oversampling)
