"""Boundary lifting, viscous and convection forms, residuals and forcing.

Velocities are handled as flat vectors in the ordering of
:class:`~axinhs.fields.VectorLayout` ("Z space": faces, swirl cells and wall
traces).  The unknowns of the solver are the stream function on interior nodes
plus the swirl on every cell; ``E`` maps them into Z space with zero traces, so
every discrete test function is divergence-free and vanishes on the wall.

Strain samples (``S = grad u + grad u^T``):

* ``S11, S22`` (and the hoop strain ``2 u_r / r``) at cell centres,
* the in-plane shear at nodes, using the wall traces one half cell away,
  wall samples sitting at the midpoint of their half-width control volume,
* swirl shears on the two face families.

``a(mu; u, v) = 1/2 sum_k m_k W_k mu_k (Du)_k (Dv)_k`` with multiplicity
``m_k`` (2 for off-diagonal entries) and the integrated metric ``W_k`` of the
sample's control volume.  Each term is ``mu_k`` times a square, which gives
the bounds ``mu_* A(1) <= A(mu) <= mu^* A(1)`` termwise.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import (CART, CYL, SPH, DensityField, StreamFunctionField, VectorLayout, VelocityField,
                     WallTraces, face_average, face_flux_weights, mass_conservation_residual,
                     velocity_from_stream)
from .grid import WALLS, DomainSpec, StaggeredGrid2D

log = logging.getLogger(__name__)


class FluxError(ValueError):
    """Boundary data with nonzero net flux."""


# --------------------------------------------------------------------------
# cutoff

def smooth_ramp(t):
    """C^1 ramp: 1 for t <= 1/2, 0 for t >= 1."""
    t = np.asarray(t, dtype=float)
    x = np.clip(2.0 * t - 1.0, 0.0, 1.0)
    return 1.0 - 3.0 * x**2 + 2.0 * x**3


def wall_distance(domain: DomainSpec, x1, x2):
    """Distance to the physical walls (the symmetry axis is not a wall)."""
    (a1, b1), (a2, b2) = domain.extent1, domain.extent2
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    d = np.minimum(np.minimum(b1 - x1, x2 - a2), b2 - x2)
    if not domain.has_axis:
        d = np.minimum(d, x1 - a1)
    return np.maximum(d, 0.0)


@dataclass
class CutoffField:
    grid: StaggeredGrid2D
    nodes: np.ndarray
    cells: np.ndarray
    delta: float
    measured_grad_bound: float

    @property
    def grad_constant(self) -> float:
        """Measured ``max|grad zeta| * delta``."""
        return self.measured_grad_bound * self.delta

    def evaluate(self, x1, x2):
        return smooth_ramp(wall_distance(self.grid.domain, x1, x2) / self.delta)


def build_cutoff(where, delta: float, n: Optional[int] = None) -> CutoffField:
    """Collar function on a grid, or on an ``n x n`` grid of a bare domain.

    The gradient bound is measured from node differences along each grid
    direction.
    """
    if not delta > 0.0:
        raise ValueError(f"cutoff width must be positive, got {delta}")
    if isinstance(where, DomainSpec):
        m = n or max(64, int(np.ceil(16 * max(where.lengths) / delta)))
        where = StaggeredGrid2D(where, m, m)
    grid = where
    dom = grid.domain
    half = 0.5 * min(dom.lengths)
    if not (0.0 < delta < half):
        raise ValueError(f"cutoff width {delta} outside (0, {half})")
    zn = smooth_ramp(wall_distance(dom, *grid.nodes()) / delta)
    zc = smooth_ramp(wall_distance(dom, *grid.centers()) / delta)
    g1 = np.abs(np.diff(zn, axis=0)) / grid.h1
    g2 = np.abs(np.diff(zn, axis=1)) / grid.h2
    bound = float(max(g1.max(initial=0.0), g2.max(initial=0.0)))
    return CutoffField(grid, zn, zc, float(delta), bound)


def default_delta(grid: StaggeredGrid2D, cells: float = 4.0) -> float:
    """``cells`` grid spacings, capped below half the smallest extent."""
    return min(cells * max(grid.h1, grid.h2), 0.45 * min(grid.domain.lengths))


# --------------------------------------------------------------------------
# boundary data and its lifting

@dataclass
class BoundaryData:
    """Dirichlet samples of ``u0``.

    ``normal[w]`` holds the face-normal velocity component on wall ``w``
    (``u1`` on left/right, ``u2`` on bottom/top, not sign-flipped); tangential
    and swirl samples live in ``traces``.  ``gauge`` fixes the stream function
    at node ``(0, 0)``.
    """

    grid: StaggeredGrid2D
    normal: dict
    traces: WallTraces
    gauge: float = 0.0

    @classmethod
    def zeros(cls, grid: StaggeredGrid2D) -> "BoundaryData":
        normal = {"left": np.zeros(grid.n2), "right": np.zeros(grid.n2),
                  "bottom": np.zeros(grid.n1), "top": np.zeros(grid.n1)}
        return cls(grid, normal, WallTraces.zeros(grid), 0.0)

    @classmethod
    def from_functions(cls, grid: StaggeredGrid2D, u1=None, u2=None, swirl=None, gauge: float = 0.0,
                       walls=WALLS) -> "BoundaryData":
        """Sample callables ``f(x1, x2)`` on the given walls; other walls get zero."""
        bd = cls.zeros(grid)
        (a1, b1), (a2, b2) = grid.domain.extent1, grid.domain.extent2
        x1n, x2n, x1c, x2c = grid.x1_nodes, grid.x2_nodes, grid.x1_centers, grid.x2_centers

        def ev(f, x, y):
            if f is None:
                return np.zeros(np.broadcast(x, y).shape)
            return np.asarray(f(x, y), dtype=float) + np.zeros(np.broadcast(x, y).shape)

        for w in walls:
            if w in ("left", "right"):
                xw = a1 if w == "left" else b1
                bd.normal[w] = ev(u1, np.full(grid.n2, xw), x2c)
                bd.traces.tangential[w] = ev(u2, np.full(grid.n2 + 1, xw), x2n)
                bd.traces.swirl[w] = ev(swirl, np.full(grid.n2, xw), x2c)
            else:
                yw = a2 if w == "bottom" else b2
                bd.normal[w] = ev(u2, x1c, np.full(grid.n1, yw))
                bd.traces.tangential[w] = ev(u1, x1n, np.full(grid.n1 + 1, yw))
                bd.traces.swirl[w] = ev(swirl, x1c, np.full(grid.n1, yw))
        if grid.domain.has_axis:
            bd.traces.tangential["left"][:] = 0.0
            bd.traces.swirl["left"][:] = 0.0
        bd.gauge = float(gauge)
        return bd

    def scaled(self, factor: float) -> "BoundaryData":
        return BoundaryData(self.grid, {k: factor * v for k, v in self.normal.items()},
                            self.traces.scaled(factor), factor * self.gauge)

    def max_abs(self) -> float:
        vals = [np.abs(v).max(initial=0.0) for v in self.normal.values()]
        vals += [np.abs(v).max(initial=0.0) for v in self.traces.tangential.values()]
        vals += [np.abs(v).max(initial=0.0) for v in self.traces.swirl.values()]
        return float(max(vals))

    def as_velocity(self) -> VelocityField:
        """Velocity holding only the boundary samples (interior zero)."""
        g = self.grid
        u = VelocityField.zeros(g)
        u.u1[0, :], u.u1[-1, :] = self.normal["left"], self.normal["right"]
        u.u2[:, 0], u.u2[:, -1] = self.normal["bottom"], self.normal["top"]
        u.traces = self.traces.copy()
        return u

    def component_fluxes(self) -> dict:
        from .fields import boundary_flux
        u = self.as_velocity()
        return {c: boundary_flux(u, c) for c in self.grid.domain.boundary_components}


def boundary_stream_values(bd: BoundaryData, tol: float = 1e-10) -> np.ndarray:
    """Flux antiderivative of ``u0 . n`` around the wall, counter-clockwise from node (0, 0).

    Returns the node array with interior entries set to NaN.
    """
    g = bd.grid
    w1, w2 = face_flux_weights(g)
    if g.domain.has_axis and np.abs(bd.normal["left"]).max() > 0.0:
        raise ValueError("radial velocity on the symmetry axis must vanish")
    q_b = w2[:, 0] * bd.normal["bottom"] * g.h1
    q_r = w1[-1, :] * bd.normal["right"] * g.h2
    q_t = w2[:, -1] * bd.normal["top"] * g.h1
    q_l = w1[0, :] * bd.normal["left"] * g.h2
    scale = max(np.abs(np.concatenate([q_b, q_r, q_t, q_l])).max(), 1e-300)
    net = -q_b.sum() + q_r.sum() + q_t.sum() - q_l.sum()
    if abs(net) > tol * max(scale * (g.n1 + g.n2), bd.max_abs() * 1e-300):
        raise FluxError(f"boundary data carries net flux {net:.3e}")
    phi = np.full(g.shape_nodes, np.nan)
    phi[0, 0] = bd.gauge
    phi[1:, 0] = bd.gauge - np.cumsum(q_b)
    phi[-1, 1:] = phi[-1, 0] + np.cumsum(q_r)
    phi[:-1, -1] = phi[-1, -1] + np.cumsum(q_t[::-1])[::-1]
    phi[0, 1:-1] = bd.gauge + np.cumsum(q_l)[:-1]
    return phi


def _dirichlet_laplace_nodes(grid: StaggeredGrid2D, boundary: np.ndarray) -> np.ndarray:
    n1, n2 = grid.n1, grid.n2
    out = boundary.copy()
    m1, m2 = n1 - 1, n2 - 1
    if m1 <= 0 or m2 <= 0:
        return out
    c1, c2 = 1.0 / grid.h1**2, 1.0 / grid.h2**2
    lap = sp.kronsum(sp.diags([-c2 * np.ones(m2 - 1), 2 * c2 * np.ones(m2), -c2 * np.ones(m2 - 1)], [-1, 0, 1]),
                     sp.diags([-c1 * np.ones(m1 - 1), 2 * c1 * np.ones(m1), -c1 * np.ones(m1 - 1)], [-1, 0, 1]),
                     format="csc")
    rhs = np.zeros((m1, m2))
    rhs[0, :] += c1 * boundary[0, 1:-1]
    rhs[-1, :] += c1 * boundary[-1, 1:-1]
    rhs[:, 0] += c2 * boundary[1:-1, 0]
    rhs[:, -1] += c2 * boundary[1:-1, -1]
    out[1:-1, 1:-1] = spla.spsolve(lap, rhs.ravel()).reshape(m1, m2)
    return out


def _dirichlet_laplace_cells(grid: StaggeredGrid2D, traces: WallTraces, axis_parity: float) -> np.ndarray:
    """Cell-centred harmonic extension of the wall swirl samples."""
    n1, n2 = grid.n1, grid.n2
    c1, c2 = 1.0 / grid.h1**2, 1.0 / grid.h2**2

    def tri(m, c, lo_ghost, hi_ghost):
        main = 2 * c * np.ones(m)
        main[0] -= c * lo_ghost
        main[-1] -= c * hi_ghost
        return sp.diags([-c * np.ones(m - 1), main, -c * np.ones(m - 1)], [-1, 0, 1])

    left_ghost = axis_parity if grid.domain.has_axis else -1.0
    lap = sp.kronsum(tri(n2, c2, -1.0, -1.0), tri(n1, c1, left_ghost, -1.0), format="csc")
    rhs = np.zeros((n1, n2))
    if not grid.domain.has_axis:
        rhs[0, :] += 2 * c1 * traces.swirl["left"]
    rhs[-1, :] += 2 * c1 * traces.swirl["right"]
    rhs[:, 0] += 2 * c2 * traces.swirl["bottom"]
    rhs[:, -1] += 2 * c2 * traces.swirl["top"]
    return spla.spsolve(lap, rhs.ravel()).reshape(n1, n2)


@dataclass
class ExtendedBoundaryData:
    phi0: StreamFunctionField
    phi0_delta: StreamFunctionField
    u0_delta: VelocityField
    cutoff: CutoffField
    data: BoundaryData

    @property
    def delta(self) -> float:
        return self.cutoff.delta


def extend_boundary_data(bd: BoundaryData, delta: float, tol: float = 1e-10) -> ExtendedBoundaryData:
    grid = bd.grid
    if grid.coord is SPH:
        raise ValueError("boundary lifting is implemented for cylindrical and Cartesian grids only")
    cut = build_cutoff(grid, delta)
    bvals = boundary_stream_values(bd, tol)
    bvals_filled = np.where(np.isnan(bvals), 0.0, bvals)
    phi0 = _dirichlet_laplace_nodes(grid, bvals_filled)
    phi0_delta = cut.nodes * phi0
    u = velocity_from_stream(StreamFunctionField(grid, phi0_delta, (0, 0), bd.gauge), check_axis=False)
    u.u1[0, :], u.u1[-1, :] = bd.normal["left"], bd.normal["right"]
    u.u2[:, 0], u.u2[:, -1] = bd.normal["bottom"], bd.normal["top"]
    u.traces = bd.traces.copy()
    has_swirl = any(np.any(v != 0) for v in bd.traces.swirl.values())
    u.swirl = cut.cells * _dirichlet_laplace_cells(grid, bd.traces, -1.0) if has_swirl else np.zeros(grid.shape_cells)
    return ExtendedBoundaryData(StreamFunctionField(grid, phi0, (0, 0), bd.gauge),
                                StreamFunctionField(grid, phi0_delta, (0, 0), bd.gauge), u, cut, bd)


# --------------------------------------------------------------------------
# sample-point averaging of cell quantities

def node_average(cell_values: np.ndarray, mode: str = "arithmetic") -> np.ndarray:
    """Average of the in-domain cells around each node."""
    n1, n2 = cell_values.shape
    total = np.zeros((n1 + 1, n2 + 1))
    count = np.zeros((n1 + 1, n2 + 1))
    if mode == "arithmetic":
        v = cell_values
    elif mode == "harmonic":
        v = 1.0 / cell_values
    else:
        raise ValueError(f"unknown averaging {mode!r}")
    for di in (0, 1):
        for dj in (0, 1):
            total[di:di + n1, dj:dj + n2] += v
            count[di:di + n1, dj:dj + n2] += 1.0
    return total / count if mode == "arithmetic" else count / total


# --------------------------------------------------------------------------
# operators

def _quarter_shift(idx: np.ndarray, n: int):
    """Interpolation to node positions moved a quarter cell inward at the walls.

    Yields ``(index, weight)`` pairs over node/face positions ``0..n``.
    """
    wall = (idx == 0) | (idx == n)
    yield idx, np.where(wall, 0.75, 1.0)
    other = np.where(idx == 0, 1, np.where(idx == n, n - 1, idx))
    yield other, np.where(wall, 0.25, 0.0)


class _Builder:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, rows, cols, vals):
        rows, cols, vals = np.broadcast_arrays(np.asarray(rows), np.asarray(cols), np.asarray(vals, dtype=float))
        keep = vals != 0.0
        self.rows.append(rows[keep].ravel())
        self.cols.append(cols[keep].ravel())
        self.vals.append(vals[keep].ravel())

    def matrix(self, shape):
        if not self.rows:
            return sp.csr_matrix(shape)
        m = sp.coo_matrix((np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
                          shape=shape)
        return m.tocsr()


@dataclass
class StrainBlock:
    name: str
    location: str   # cell | node | face1 | face2
    rows: slice
    mask: np.ndarray  # which samples of the location family are present
    multiplicity: float


class DiscreteOperators:
    """Grid-dependent sparse operators, built once per grid."""

    def __init__(self, grid: StaggeredGrid2D):
        if grid.coord is SPH:
            raise ValueError("spherical grids support kernel operations only")
        self.grid = grid
        self.layout = VectorLayout(grid)
        self.cyl = grid.coord is CYL
        self.axis = grid.domain.has_axis
        self._build_strain()
        self._build_wall_closure()
        self._build_dofs()
        self._build_cell_interp()
        self._build_weights()

    # ---- index helpers
    def _iu1(self, i, j):
        return self.layout.index("u1", i, j)

    def _iu2(self, i, j):
        return self.layout.index("u2", i, j)

    def _is(self, i, j):
        return self.layout.index("s", i, j)

    def _it(self, wall, k):
        return self.layout.index("t_" + wall, k)

    def _isw(self, wall, k):
        return self.layout.index("s_" + wall, k)

    # ---- strain
    def _build_strain(self):
        g = self.grid
        n1, n2, h1, h2 = g.n1, g.n2, g.h1, g.h2
        b = _Builder()
        blocks = []
        row = 0
        I, J = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
        cell_rows = row + np.ravel_multi_index((I, J), (n1, n2))

        # normal strains at cells
        b.add(cell_rows, self._iu1(I + 1, J), 2.0 / h1)
        b.add(cell_rows, self._iu1(I, J), -2.0 / h1)
        blocks.append(StrainBlock("S11", "cell", slice(row, row + n1 * n2), np.ones((n1, n2), bool), 1.0))
        row += n1 * n2
        cell_rows = row + np.ravel_multi_index((I, J), (n1, n2))
        b.add(cell_rows, self._iu2(I, J + 1), 2.0 / h2)
        b.add(cell_rows, self._iu2(I, J), -2.0 / h2)
        blocks.append(StrainBlock("S22", "cell", slice(row, row + n1 * n2), np.ones((n1, n2), bool), 1.0))
        row += n1 * n2
        if self.cyl:
            # hoop strain 2 u_r / r sampled where u_r lives, so its quadrature
            # stays exact for u_r ~ r^2 next to the axis
            mask = np.ones((n1 + 1, n2), bool)
            if self.axis:
                mask[0, :] = False
            FI, FJ = np.nonzero(mask)
            b.add(row + np.arange(FI.size), self._iu1(FI, FJ), 2.0 / g.x1_nodes[FI])
            blocks.append(StrainBlock("Shoop", "face1", slice(row, row + FI.size), mask, 1.0))
            row += FI.size

        # in-plane shear at nodes.  A wall node's control volume is half a
        # cell wide, so its sample sits at that half cell's midpoint, a
        # quarter cell in from the wall: one-sided differences against the
        # trace and 3:1 interpolation of the cross term keep every sample
        # second-order accurate where it is placed.
        mask = np.ones((n1 + 1, n2 + 1), bool)
        if self.axis:
            mask[0, :] = False
        NI, NJ = np.nonzero(mask)
        nrows = row + np.arange(NI.size)
        for ii, wi in _quarter_shift(NI, n1):
            # d u1 / d x2 with u1 taken at the shifted x1 position
            inner = (NJ > 0) & (NJ < n2)
            b.add(nrows[inner], self._iu1(ii[inner], NJ[inner]), wi[inner] / h2)
            b.add(nrows[inner], self._iu1(ii[inner], NJ[inner] - 1), -wi[inner] / h2)
            bot = NJ == 0
            b.add(nrows[bot], self._iu1(ii[bot], 0), 2.0 * wi[bot] / h2)
            b.add(nrows[bot], self._it("bottom", ii[bot]), -2.0 * wi[bot] / h2)
            top = NJ == n2
            b.add(nrows[top], self._it("top", ii[top]), 2.0 * wi[top] / h2)
            b.add(nrows[top], self._iu1(ii[top], n2 - 1), -2.0 * wi[top] / h2)
        for jj, wj in _quarter_shift(NJ, n2):
            inner = (NI > 0) & (NI < n1)
            b.add(nrows[inner], self._iu2(NI[inner], jj[inner]), wj[inner] / h1)
            b.add(nrows[inner], self._iu2(NI[inner] - 1, jj[inner]), -wj[inner] / h1)
            lft = NI == 0
            b.add(nrows[lft], self._iu2(0, jj[lft]), 2.0 * wj[lft] / h1)
            b.add(nrows[lft], self._it("left", jj[lft]), -2.0 * wj[lft] / h1)
            rgt = NI == n1
            b.add(nrows[rgt], self._it("right", jj[rgt]), 2.0 * wj[rgt] / h1)
            b.add(nrows[rgt], self._iu2(n1 - 1, jj[rgt]), -2.0 * wj[rgt] / h1)
        blocks.append(StrainBlock("S12", "node", slice(row, row + NI.size), mask, 2.0))
        row += NI.size

        # swirl shear on faces normal to direction 1; in cylindrical
        # coordinates r d/dr(u_theta / r) with r taken at the sample position
        mask = np.ones((n1 + 1, n2), bool)
        if self.axis:
            mask[0, :] = False
        FI, FJ = np.nonzero(mask)
        frows = row + np.arange(FI.size)
        x1n, x1c = g.x1_nodes, g.x1_centers
        inv_c = 1.0 / x1c if self.cyl else np.ones(n1)
        inner = (FI > 0) & (FI < n1)
        fi = FI[inner]
        rs = x1n[fi] if self.cyl else np.ones(fi.size)
        b.add(frows[inner], self._is(fi, FJ[inner]), rs * inv_c[fi] / h1)
        b.add(frows[inner], self._is(fi - 1, FJ[inner]), -rs * inv_c[fi - 1] / h1)
        lft = FI == 0
        if np.any(lft):
            rm, rw = (x1n[0] + 0.25 * h1, x1n[0]) if self.cyl else (1.0, 1.0)
            b.add(frows[lft], self._is(0, FJ[lft]), 2.0 * rm * inv_c[0] / h1)
            b.add(frows[lft], self._isw("left", FJ[lft]), -2.0 * rm / rw / h1)
        rgt = FI == n1
        rm, rw = (x1n[n1] - 0.25 * h1, x1n[n1]) if self.cyl else (1.0, 1.0)
        b.add(frows[rgt], self._isw("right", FJ[rgt]), 2.0 * rm / rw / h1)
        b.add(frows[rgt], self._is(n1 - 1, FJ[rgt]), -2.0 * rm * inv_c[n1 - 1] / h1)
        blocks.append(StrainBlock("S13", "face1", slice(row, row + FI.size), mask, 2.0))
        row += FI.size

        # swirl shear on faces normal to direction 2
        mask = np.ones((n1, n2 + 1), bool)
        FI, FJ = np.nonzero(mask)
        frows = row + np.arange(FI.size)
        inner = (FJ > 0) & (FJ < n2)
        b.add(frows[inner], self._is(FI[inner], FJ[inner]), 1.0 / h2)
        b.add(frows[inner], self._is(FI[inner], FJ[inner] - 1), -1.0 / h2)
        bot = FJ == 0
        b.add(frows[bot], self._is(FI[bot], 0), 2.0 / h2)
        b.add(frows[bot], self._isw("bottom", FI[bot]), -2.0 / h2)
        top = FJ == n2
        b.add(frows[top], self._isw("top", FI[top]), 2.0 / h2)
        b.add(frows[top], self._is(FI[top], n2 - 1), -2.0 / h2)
        blocks.append(StrainBlock("S23", "face2", slice(row, row + FI.size), mask, 2.0))
        row += FI.size

        self.D = b.matrix((row, self.layout.size))
        self.strain_blocks = blocks
        self.n_samples = row

        vols = {"cell": g.cell_volumes(), "node": g.node_volumes(),
                "face1": g.face1_volumes(), "face2": g.face2_volumes()}
        geo = np.empty(row)
        for blk in blocks:
            geo[blk.rows] = blk.multiplicity * vols[blk.location][blk.mask]
        self.sample_geometry = geo

    def _build_wall_closure(self):
        """Petrov-Galerkin strain pair for the solve, differing from ``D`` only at wall samples.

        The symmetric form samples wall shear a quarter cell inside and
        interpolates the cross term 3:1, which leaves the first rows of
        unknowns inconsistent by O(1).  Here the trial strain takes the
        sheared component on the wall with a one-sided stencil through the
        wall value and the nearest cells (cubic where three cells are
        available, matched to the error of interior differences) and the
        test strain keeps the two-point difference but drops the shifted
        interpolation, so every row is a flux balance over its own control
        volume.  Both are exact for linear profiles.  Metric
        factors move the flux from the sample radius to the wall radius.
        """
        g = self.grid
        n1, n2, h1, h2 = g.n1, g.n2, g.h1, g.h2
        blk = {b.name: b for b in self.strain_blocks}
        trial, test = _Builder(), _Builder()
        replaced = []
        x1n = g.x1_nodes

        def one_sided(m):
            # d/dx at the wall from the wall value and cells at h/2, 3h/2, 5h/2;
            # the cubic version carries the same h^2 u'''/24 as an interior
            # two-point difference, so wall rows telescope like interior rows
            if m >= 3:
                return -16.0 / 5.0, np.array([4.0, -1.0, 1.0 / 5.0])
            return -8.0 / 3.0, np.array([3.0, -1.0 / 3.0])

        def inward(start, m, k):
            return start + k if start == 0 else start - k

        def normal(rows, at_wall, cells, sign, h, fac=1.0):
            """``cells(k)`` indexes the k-th cell row away from the wall."""
            w0, wc = one_sided(self._normal_cells)
            trial.add(rows, at_wall, w0 * sign * fac / h)
            for k, w in enumerate(wc):
                trial.add(rows, cells(k), w * sign * fac / h)
            test.add(rows, cells(0), 2.0 * sign / h)
            test.add(rows, at_wall, -2.0 * sign / h)

        def both(rows, cols, vals, fac=1.0):
            trial.add(rows, cols, vals * fac)
            test.add(rows, cols, vals)

        def side_factor(ni):
            if not self.cyl:
                return 1.0
            rw = x1n[ni]
            return rw / (rw + (0.25 if ni == 0 else -0.25) * h1)

        self._normal_cells = min(n1, n2)

        # in-plane shear at wall nodes
        S = blk["S12"]
        NI, NJ = np.nonzero(S.mask)
        rows = S.rows.start + np.arange(NI.size)
        on_side = (NI == 0) | (NI == n1)
        on_cap = (NJ == 0) | (NJ == n2)
        replaced.append(rows[on_side | on_cap])
        for nj, sign, wall in ((0, 1.0, "bottom"), (n2, -1.0, "top")):
            sel = NJ == nj
            ii = NI[sel]
            c0 = 0 if nj == 0 else n2 - 1
            normal(rows[sel], self._it(wall, ii), lambda k: self._iu1(ii, inward(c0, n2, k)), sign, h2)
            sel = sel & ~on_side
            both(rows[sel], self._iu2(NI[sel], nj), np.full(sel.sum(), 1.0 / h1))
            both(rows[sel], self._iu2(NI[sel] - 1, nj), np.full(sel.sum(), -1.0 / h1))
        for ni, sign, wall in ((0, 1.0, "left"), (n1, -1.0, "right")):
            sel = NI == ni
            if not np.any(sel):
                continue
            jj = NJ[sel]
            fac = side_factor(ni)
            c0 = 0 if ni == 0 else n1 - 1
            normal(rows[sel], self._it(wall, jj), lambda k: self._iu2(inward(c0, n1, k), jj), sign, h1, fac)
            sel = sel & ~on_cap
            both(rows[sel], self._iu1(ni, NJ[sel]), np.full(sel.sum(), 1.0 / h2), fac)
            both(rows[sel], self._iu1(ni, NJ[sel] - 1), np.full(sel.sum(), -1.0 / h2), fac)

        # swirl shear on side walls: r d/dr(u_theta / r) at the wall
        S = blk["S13"]
        FI, FJ = np.nonzero(S.mask)
        rows = S.rows.start + np.arange(FI.size)
        w0, wc = one_sided(self._normal_cells)
        for ni, sign, wall in ((0, 1.0, "left"), (n1, -1.0, "right")):
            sel = FI == ni
            if not np.any(sel):
                continue
            replaced.append(rows[sel])
            r, jj = rows[sel], FJ[sel]
            c0 = 0 if ni == 0 else n1 - 1
            # test side: the symmetric two-point sample
            sub = self.D[r]
            test.add(np.repeat(r, np.diff(sub.indptr)), sub.indices, sub.data)
            if self.cyl:
                # q = u_theta / r differenced, then scaled to the sample radius
                rw = x1n[ni]
                rm = rw + 0.25 * sign * h1
                fac = rw * (rw / rm) ** 2
                rc = g.x1_centers
            else:
                rw, fac, rc = 1.0, 1.0, np.ones(n1)
            trial.add(r, self._isw(wall, jj), w0 * sign * fac / (rw * h1))
            for k, w in enumerate(wc):
                ck = inward(c0, n1, k)
                trial.add(r, self._is(ck, jj), w * sign * fac / (rc[ck] * h1))

        # swirl shear on bottom/top walls
        S = blk["S23"]
        FI, FJ = np.nonzero(S.mask)
        rows = S.rows.start + np.arange(FI.size)
        for nj, sign, wall in ((0, 1.0, "bottom"), (n2, -1.0, "top")):
            sel = FJ == nj
            replaced.append(rows[sel])
            c0 = 0 if nj == 0 else n2 - 1
            fi = FI[sel]
            normal(rows[sel], self._isw(wall, fi), lambda k: self._is(fi, inward(c0, n2, k)), sign, h2)

        replaced = np.concatenate(replaced)
        keep = np.ones(self.n_samples)
        keep[replaced] = 0.0
        base = sp.diags(keep) @ self.D
        self.D_trial = (base + trial.matrix(self.D.shape)).tocsr()
        self.D_test = (base + test.matrix(self.D.shape)).tocsr()

    def sample_viscosity(self, mu_cells: np.ndarray, mode: str = "arithmetic") -> np.ndarray:
        fam = {"cell": mu_cells, "node": node_average(mu_cells, mode),
               "face1": face_average(mu_cells, 0, mode), "face2": face_average(mu_cells, 1, mode)}
        out = np.empty(self.n_samples)
        for blk in self.strain_blocks:
            out[blk.rows] = fam[blk.location][blk.mask]
        return out

    # ---- unknowns
    def _build_dofs(self):
        g = self.grid
        n1, n2 = g.n1, g.n2
        self.n_phi = (n1 - 1) * (n2 - 1)
        self.n_swirl = n1 * n2
        self.n_dofs = self.n_phi + self.n_swirl
        w1, w2 = face_flux_weights(g)

        def pid(i, j):
            return (i - 1) * (n2 - 1) + (j - 1)

        b = _Builder()
        # u1[i, j] = (phi[i, j+1] - phi[i, j]) / (h2 w1)
        I, J = np.meshgrid(np.arange(1, n1), np.arange(n2), indexing="ij")
        with np.errstate(divide="ignore"):
            coef = 1.0 / (g.h2 * w1[I, J])
        up = J + 1 <= n2 - 1
        b.add(self._iu1(I[up], J[up]), pid(I[up], J[up] + 1), coef[up])
        dn = J >= 1
        b.add(self._iu1(I[dn], J[dn]), pid(I[dn], J[dn]), -coef[dn])
        # u2[i, j] = -(phi[i+1, j] - phi[i, j]) / (h1 w2)
        I, J = np.meshgrid(np.arange(n1), np.arange(1, n2), indexing="ij")
        coef = 1.0 / (g.h1 * w2[I, J])
        rt = I + 1 <= n1 - 1
        b.add(self._iu2(I[rt], J[rt]), pid(I[rt] + 1, J[rt]), -coef[rt])
        lf = I >= 1
        b.add(self._iu2(I[lf], J[lf]), pid(I[lf], J[lf]), coef[lf])
        I, J = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
        b.add(self._is(I, J), self.n_phi + np.ravel_multi_index((I, J), (n1, n2)), 1.0)
        self.E = b.matrix((self.layout.size, self.n_dofs))
        self.ET = self.E.T.tocsr()

    def stream_nodes(self, dofs) -> np.ndarray:
        g = self.grid
        phi = np.zeros(g.shape_nodes)
        phi[1:-1, 1:-1] = np.asarray(dofs)[: self.n_phi].reshape(g.n1 - 1, g.n2 - 1)
        return phi

    def dofs_from(self, phi_nodes: np.ndarray, swirl: np.ndarray) -> np.ndarray:
        return np.concatenate([phi_nodes[1:-1, 1:-1].ravel(), np.asarray(swirl).ravel()])

    def velocity(self, dofs) -> VelocityField:
        return self.layout.unpack(self.E @ dofs)

    # ---- convection: cell interpolation and dual-face mass fluxes
    def _build_cell_interp(self):
        g = self.grid
        n1, n2 = g.n1, g.n2
        nc = n1 * n2
        I, J = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
        c = np.ravel_multi_index((I, J), (n1, n2))
        P = []
        b = _Builder()
        b.add(c, self._iu1(I, J), 0.5)
        b.add(c, self._iu1(I + 1, J), 0.5)
        P.append(b.matrix((nc, self.layout.size)))
        b = _Builder()
        b.add(c, self._iu2(I, J), 0.5)
        b.add(c, self._iu2(I, J + 1), 0.5)
        P.append(b.matrix((nc, self.layout.size)))
        b = _Builder()
        b.add(c, self._is(I, J), 1.0)
        P.append(b.matrix((nc, self.layout.size)))
        self.P = P
        self._build_flux_pairs()

    def _build_flux_pairs(self):
        """Neighbouring control volumes of each component and the dual face between them.

        Every pair stores the two unknowns, the map from a velocity vector to
        the normal velocity on the shared face (oriented from the first to the
        second), the map from cell densities to the face density, the face
        measure and the coupling factor: 1/2 between unknowns a cell apart,
        1 towards a wall value half a cell away.
        """
        g = self.grid
        n1, n2, h1, h2 = g.n1, g.n2, g.h1, g.h2
        nc = n1 * n2
        d1n, d1c = g._dual_1d(0, True), g._dual_1d(0, False)
        d2n = g._dual_1d(1, True)
        r1n = g.x1_nodes if self.cyl else np.ones(n1 + 1)
        r1c = g.x1_centers if self.cyl else np.ones(n1)
        wm, rm = _Builder(), _Builder()
        first, second, area, fac = [], [], [], []
        count = [0]

        def cell(i, j):
            return np.ravel_multi_index((i, j), (n1, n2))

        def add(p, q, ar, f, w_terms, r_cells):
            p, q = np.broadcast_arrays(np.asarray(p), np.asarray(q))
            k = count[0] + np.arange(p.size)
            count[0] += p.size
            first.append(p.ravel())
            second.append(q.ravel())
            area.append(np.broadcast_to(ar, p.shape).ravel().astype(float))
            fac.append(np.full(p.size, f))
            for cols, coef in w_terms:
                wm.add(k, np.broadcast_to(cols, p.shape).ravel(), coef)
            rows = np.concatenate([k] * len(r_cells))
            cols = np.concatenate([np.broadcast_to(cc, p.shape).ravel() for cc in r_cells])
            rm.add(rows, cols, 1.0 / len(r_cells))

        def node_cells(i, j):
            """In-domain cells around node (i, j) for arrays of one fixed kind."""
            out = []
            for di in (-1, 0):
                for dj in (-1, 0):
                    ii, jj = i + di, j + dj
                    if np.all((ii >= 0) & (ii < n1) & (jj >= 0) & (jj < n2)):
                        out.append(cell(ii, jj))
            return out

        def side_w2(i, j):
            """Velocity along x2 at nodes (i, j) of a side wall or the axis."""
            if i == 0:
                return [(self._iu2(0, j), 1.0)] if self.axis else [(self._it("left", j), 1.0)]
            return [(self._it("right", j), 1.0)]

        def cap_w1(i, j):
            wall = "bottom" if j == 0 else "top"
            return [(self._it(wall, i), 1.0)]

        # u1 control volumes
        for j in range(n2):
            i = np.arange(n1)
            add(self._iu1(i, j), self._iu1(i + 1, j), r1c * h2, 0.5,
                [(self._iu1(i, j), 0.5), (self._iu1(i + 1, j), 0.5)], [cell(i, j)])
        for j in range(n2 + 1):
            for i in range(n1 + 1):
                if j in (0, n2):
                    # wall below or above: normal velocity at the wall node
                    if 0 < i < n1:
                        wn = [(self._iu2(i - 1, j), 0.5), (self._iu2(i, j), 0.5)]
                    else:
                        wn = side_w2(i, j)
                    sgn = -1.0 if j == 0 else 1.0
                    inner = 0 if j == 0 else n2 - 1
                    wall = "bottom" if j == 0 else "top"
                    add(self._iu1(i, inner), self._it(wall, i), d1n[i], 1.0,
                        [(c_, sgn * v) for c_, v in wn], node_cells(np.array(i), np.array(j)))
                else:
                    if i in (0, n1):
                        wn = side_w2(i, j)
                    else:
                        wn = [(self._iu2(i - 1, j), 0.5), (self._iu2(i, j), 0.5)]
                    add(self._iu1(i, j - 1), self._iu1(i, j), d1n[i], 0.5, wn,
                        node_cells(np.array(i), np.array(j)))
        # u2 control volumes
        for i in range(n1):
            j = np.arange(n2)
            add(self._iu2(i, j), self._iu2(i, j + 1), d1c[i], 0.5,
                [(self._iu2(i, j), 0.5), (self._iu2(i, j + 1), 0.5)], [cell(i, j)])
        for i in range(n1 + 1):
            for j in range(n2 + 1):
                if 0 < j < n2:
                    wn = [(self._iu1(i, j - 1), 0.5), (self._iu1(i, j), 0.5)]
                else:
                    wn = cap_w1(i, j)
                cells = node_cells(np.array(i), np.array(j))
                if 0 < i < n1:
                    add(self._iu2(i - 1, j), self._iu2(i, j), r1n[i] * d2n[j], 0.5, wn, cells)
                elif i == n1:
                    add(self._iu2(n1 - 1, j), self._it("right", j), r1n[i] * d2n[j], 1.0, wn, cells)
                elif not self.axis:
                    add(self._iu2(0, j), self._it("left", j), r1n[i] * d2n[j], 1.0,
                        [(c_, -v) for c_, v in wn], cells)
        # swirl control volumes
        I, J = np.meshgrid(np.arange(n1 - 1), np.arange(n2), indexing="ij")
        add(self._is(I, J), self._is(I + 1, J), r1n[I + 1] * h2, 0.5, [(self._iu1(I + 1, J), 1.0)],
            [cell(I, J), cell(I + 1, J)])
        I, J = np.meshgrid(np.arange(n1), np.arange(n2 - 1), indexing="ij")
        add(self._is(I, J), self._is(I, J + 1), d1c[I], 0.5, [(self._iu2(I, J + 1), 1.0)],
            [cell(I, J), cell(I, J + 1)])
        J = np.arange(n2)
        if not self.axis:
            add(self._is(0, J), self._isw("left", J), r1n[0] * h2, 1.0, [(self._iu1(0, J), -1.0)], [cell(0, J)])
        add(self._is(n1 - 1, J), self._isw("right", J), r1n[n1] * h2, 1.0, [(self._iu1(n1, J), 1.0)],
            [cell(n1 - 1, J)])
        I = np.arange(n1)
        add(self._is(I, 0), self._isw("bottom", I), d1c, 1.0, [(self._iu2(I, 0), -1.0)], [cell(I, 0)])
        add(self._is(I, n2 - 1), self._isw("top", I), d1c, 1.0, [(self._iu2(I, n2), 1.0)], [cell(I, n2 - 1)])

        npairs = count[0]
        self.pair_first = np.concatenate(first)
        self.pair_second = np.concatenate(second)
        self.pair_weight = np.concatenate(area) * np.concatenate(fac)
        self.pair_velocity = wm.matrix((npairs, self.layout.size))
        self.pair_density = rm.matrix((npairs, nc))

    # ---- quadrature weights for loads
    def _build_weights(self):
        g = self.grid
        L = self.layout
        w = np.zeros(L.size)
        L.block(w, "u1")[:] = g.face1_volumes().ravel()
        L.block(w, "u2")[:] = g.face2_volumes().ravel()
        L.block(w, "s")[:] = g.cell_volumes().ravel()
        self.load_weights = w
        self.cell_volumes = g.cell_volumes().ravel()
        self.r_cells = np.repeat(g.x1_centers, g.n2) if self.cyl else None

    # ---- forms
    def strain(self, Z) -> np.ndarray:
        return self.D @ Z

    def viscous_matrix(self, mu_cells, mode: str = "arithmetic", wall_closure: bool = False):
        """Z-space matrix of ``a(mu; u, v) = 1/2 int mu Su:Sv w``.

        With ``wall_closure`` the trial strain uses the on-wall one-sided
        samples; the result is then not symmetric.
        """
        m = 0.5 * self.sample_geometry * self.sample_viscosity(np.asarray(mu_cells, float), mode)
        if wall_closure:
            return (self.D_test.T @ sp.diags(m) @ self.D_trial).tocsr()
        A = (self.D.T @ sp.diags(m) @ self.D).tocsr()
        return ((A + A.T) * 0.5).tocsr()

    def viscous_energy(self, mu_cells, Z, mode: str = "arithmetic") -> float:
        m = 0.5 * self.sample_geometry * self.sample_viscosity(np.asarray(mu_cells, float), mode)
        s = self.D @ Z
        return float(np.sum(m * s * s))

    def convection_matrix(self, rho_cells, W):
        """Skew-symmetric Z-space matrix of ``c(rho, w; u, v)``: row v, column u.

        Neighbouring control volumes exchange momentum through the mass flux
        on their shared dual face, the symmetry-preserving central form; it
        is skew by construction and consistent next to walls without normal
        flow.  Cylindrical grids add the centrifugal/Coriolis exchange pair.
        """
        rho = np.asarray(rho_cells, float).ravel()
        m = (self.pair_density @ rho) * (self.pair_velocity @ W) * self.pair_weight
        n = self.layout.size
        rows = np.concatenate([self.pair_first, self.pair_second])
        cols = np.concatenate([self.pair_second, self.pair_first])
        T = sp.coo_matrix((np.concatenate([m, -m]), (rows, cols)), shape=(n, n)).tocsr()
        if self.cyl:
            cw = rho * self.cell_volumes * (self.P[2] @ W) / self.r_cells
            T = T + self.P[0].T @ sp.diags(-cw) @ self.P[2] + self.P[2].T @ sp.diags(cw) @ self.P[0]
        return ((T - T.T) * 0.5).tocsr()

    def project(self, M):
        """Restrict a Z-space operator to the divergence-free, zero-trace unknowns."""
        return (self.ET @ M @ self.E).tocsr()

    def unit_norm_matrix(self):
        """Discrete H^1 inner product of the unknowns, ``A(1)`` restricted."""
        if not hasattr(self, "_unit"):
            A = self.project(self.viscous_matrix(np.ones(self.grid.shape_cells)))
            self._unit = ((A + A.T) * 0.5).tocsr()
        return self._unit

    def h1_norm(self, dofs) -> float:
        x = np.asarray(dofs)
        return float(np.sqrt(max(x @ (self.unit_norm_matrix() @ x), 0.0)))


@functools.lru_cache(maxsize=16)
def operators_for(grid: StaggeredGrid2D) -> DiscreteOperators:
    return DiscreteOperators(grid)


# --------------------------------------------------------------------------
# public assembly entry points

@dataclass
class AssembledForms:
    A: sp.csr_matrix            # restricted viscous operator
    N: Optional[sp.csr_matrix]  # restricted skew convection operator
    load: Optional[np.ndarray]  # restricted load vector


def _check_bounds(mu, bounds):
    if bounds is None:
        return
    lo, hi = bounds
    if np.any(mu < lo) or np.any(mu > hi):
        raise ValueError(f"viscosity outside [{lo}, {hi}]")


def assemble_viscous(mu_cells, grid: StaggeredGrid2D, mode: str = "arithmetic", bounds=None,
                     restricted: bool = True):
    """Viscous operator; ``restricted`` eliminates trace rows/columns via the stream unknowns."""
    mu_cells = np.asarray(mu_cells, float)
    _check_bounds(mu_cells, bounds)
    ops = operators_for(grid)
    A = ops.viscous_matrix(mu_cells, mode)
    if not restricted:
        return A
    Ax = ops.project(A)
    return ((Ax + Ax.T) * 0.5).tocsr()


def assemble_convection(rho: DensityField, w: VelocityField, restricted: bool = True, check: bool = True):
    if rho.grid != w.grid:
        raise ValueError("density and advecting velocity live on different grids")
    ops = operators_for(w.grid)
    if check:
        res = mass_conservation_residual(rho, w)
        scale = np.abs(rho.values).max() * max(w.norm(), 1e-300) / min(w.grid.h1, w.grid.h2)
        if res.max_norm > 1e-6 * scale:
            log.debug("advecting field has mass-conservation residual %.3e", res.max_norm)
    N = ops.convection_matrix(rho.values, w.to_vector())
    if not restricted:
        return N
    B = ops.project(N)
    return ((B - B.T) * 0.5).tocsr()


@dataclass
class ForcingField:
    grid: StaggeredGrid2D
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray

    def __post_init__(self):
        g = self.grid
        self.f1 = np.asarray(self.f1, float) + np.zeros(g.shape_faces1)
        self.f2 = np.asarray(self.f2, float) + np.zeros(g.shape_faces2)
        self.f3 = np.asarray(self.f3, float) + np.zeros(g.shape_cells)
        if not all(np.all(np.isfinite(a)) for a in (self.f1, self.f2, self.f3)):
            raise ValueError("forcing must be finite")

    @classmethod
    def zeros(cls, grid):
        return cls(grid, 0.0, 0.0, 0.0)

    @classmethod
    def from_functions(cls, grid, f1=None, f2=None, f3=None):
        def ev(f, xy):
            return 0.0 if f is None else f(*xy)
        return cls(grid, ev(f1, grid.faces1()), ev(f2, grid.faces2()), ev(f3, grid.centers()))

    @classmethod
    def constant(cls, grid, c1=0.0, c2=0.0, c3=0.0):
        return cls(grid, c1, c2, c3)

    def z_vector(self) -> np.ndarray:
        ops = operators_for(self.grid)
        L = ops.layout
        z = np.zeros(L.size)
        L.block(z, "u1")[:] = self.f1.ravel()
        L.block(z, "u2")[:] = self.f2.ravel()
        L.block(z, "s")[:] = self.f3.ravel()
        return z * ops.load_weights

    def load(self) -> np.ndarray:
        """``<f, v_k>`` for every unknown."""
        return operators_for(self.grid).ET @ self.z_vector()


# --------------------------------------------------------------------------
# residuals

def weak_residual_vector(rho: DensityField, mu_cells, u_total: VelocityField, f: ForcingField,
                         mode: str = "arithmetic") -> np.ndarray:
    """``a(mu; u, v_k) + c(rho, u; u, v_k) - <f, v_k>`` for every test unknown."""
    ops = operators_for(u_total.grid)
    Z = u_total.to_vector()
    A = ops.viscous_matrix(mu_cells, mode, wall_closure=True)
    r = A @ Z + ops.convection_matrix(rho.values, Z) @ Z - f.z_vector()
    return ops.ET @ r


def weak_residual(rho: DensityField, mu_cells, u_total: VelocityField, f: ForcingField,
                  u0_delta: Optional[VelocityField] = None, mode: str = "arithmetic") -> float:
    """Largest weak defect over the test basis, each scaled by the test function's H^1 norm."""
    if u0_delta is not None:
        a = u_total.to_vector()
        b = u0_delta.to_vector()
        L = operators_for(u_total.grid).layout
        for name in ("t_left", "t_right", "t_bottom", "t_top", "s_left", "s_right", "s_bottom", "s_top"):
            if not np.array_equal(L.block(a, name), L.block(b, name)):
                raise ValueError(f"trace mismatch on {name}")
    ops = operators_for(u_total.grid)
    r = weak_residual_vector(rho, mu_cells, u_total, f, mode)
    if r.size == 0:
        return 0.0
    norms = np.sqrt(ops.unit_norm_matrix().diagonal())
    return float(np.max(np.abs(r) / norms))


def strong_residual_forcing(rho: DensityField, mu_cells, u: VelocityField, pressure=None,
                            mode: str = "arithmetic") -> ForcingField:
    """``div(rho u u) - div(mu S u) + grad(pressure)`` by nested staggered differences.

    Interior faces and cells only; boundary faces carry zero since no test
    function sees them.
    """
    g = u.grid
    ops = operators_for(g)
    Z = u.to_vector()
    A = ops.viscous_matrix(mu_cells, mode, wall_closure=True)
    r = A @ Z + ops.convection_matrix(rho.values, Z) @ Z
    L = ops.layout
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(ops.load_weights > 0, r / np.where(ops.load_weights > 0, ops.load_weights, 1.0), 0.0)
    f1 = L.block(dens, "u1").reshape(g.shape_faces1).copy()
    f2 = L.block(dens, "u2").reshape(g.shape_faces2).copy()
    f3 = L.block(dens, "s").reshape(g.shape_cells).copy()
    f1[0, :] = f1[-1, :] = 0.0
    f2[:, 0] = f2[:, -1] = 0.0
    if pressure is not None:
        p = np.asarray(pressure, float)
        f1[1:-1, :] += (p[1:, :] - p[:-1, :]) / g.h1
        f2[:, 1:-1] += (p[:, 1:] - p[:, :-1]) / g.h2
    return ForcingField(g, f1, f2, f3)
