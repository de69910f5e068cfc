"""Discrete fields on the staggered grid and the exact kernel identities.

The stream function lives on nodes, so the velocity obtained from one-cell node
differences has a weighted divergence that telescopes to zero in every cell.
The same weights define boundary fluxes, stream recovery by path integration
and the discrete mass-conservation residual.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import WALLS, CoordinateSystem, StaggeredGrid2D
from .materials import MaterialLaws

CYL = CoordinateSystem.CYLINDRICAL_RZ
CART = CoordinateSystem.CARTESIAN_XY
SPH = CoordinateSystem.SPHERICAL_RALPHA

# sin(alpha) below this is treated as the polar axis
POLAR_FLOOR = 1e-8


class ClosureTag(enum.Enum):
    TYPE_I_ETA_OF_STREAM = "stream"
    TYPE_II_ETA_OF_COORDINATE = "coordinate"
    EXPLICIT = "explicit"


@dataclass
class StreamFunctionField:
    grid: StaggeredGrid2D
    values: np.ndarray
    gauge_node: tuple[int, int] = (0, 0)
    gauge: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape_nodes:
            raise ValueError(f"stream values have shape {self.values.shape}, expected {self.grid.shape_nodes}")

    @classmethod
    def from_function(cls, grid, func, gauge_node=(0, 0)):
        x1, x2 = grid.nodes()
        vals = np.asarray(func(x1, x2), dtype=float) + np.zeros(grid.shape_nodes)
        return cls(grid, vals, tuple(gauge_node), float(vals[tuple(gauge_node)]))


@dataclass
class WallTraces:
    """Dirichlet data on the walls that is not stored on a boundary face.

    ``tangential[w]`` is the in-plane tangential component at the wall nodes,
    ``swirl[w]`` the out-of-plane component at the wall face midpoints.
    """

    tangential: dict
    swirl: dict

    @classmethod
    def zeros(cls, grid: StaggeredGrid2D) -> "WallTraces":
        n1, n2 = grid.n1, grid.n2
        tang = {"left": np.zeros(n2 + 1), "right": np.zeros(n2 + 1),
                "bottom": np.zeros(n1 + 1), "top": np.zeros(n1 + 1)}
        sw = {"left": np.zeros(n2), "right": np.zeros(n2), "bottom": np.zeros(n1), "top": np.zeros(n1)}
        return cls(tang, sw)

    def copy(self) -> "WallTraces":
        return WallTraces({k: v.copy() for k, v in self.tangential.items()},
                          {k: v.copy() for k, v in self.swirl.items()})

    def scaled(self, factor: float) -> "WallTraces":
        return WallTraces({k: factor * v for k, v in self.tangential.items()},
                          {k: factor * v for k, v in self.swirl.items()})


@dataclass
class VelocityField:
    grid: StaggeredGrid2D
    u1: np.ndarray
    u2: np.ndarray
    swirl: Optional[np.ndarray] = None
    traces: WallTraces = None

    def __post_init__(self):
        g = self.grid
        self.u1 = np.asarray(self.u1, dtype=float)
        self.u2 = np.asarray(self.u2, dtype=float)
        if self.u1.shape != g.shape_faces1 or self.u2.shape != g.shape_faces2:
            raise ValueError("velocity component shapes do not match the grid")
        if self.swirl is not None:
            self.swirl = np.asarray(self.swirl, dtype=float)
            if self.swirl.shape != g.shape_cells:
                raise ValueError("swirl must be cell-centred")
        if self.traces is None:
            self.traces = WallTraces.zeros(g)
        if not (np.all(np.isfinite(self.u1)) and np.all(np.isfinite(self.u2))):
            raise ValueError("velocity components must be finite")

    @classmethod
    def zeros(cls, grid: StaggeredGrid2D, swirl: bool = True) -> "VelocityField":
        return cls(grid, np.zeros(grid.shape_faces1), np.zeros(grid.shape_faces2),
                   np.zeros(grid.shape_cells) if swirl else None)

    @property
    def swirl_or_zero(self) -> np.ndarray:
        return np.zeros(self.grid.shape_cells) if self.swirl is None else self.swirl

    def norm(self) -> float:
        parts = [np.abs(self.u1).max(initial=0.0), np.abs(self.u2).max(initial=0.0),
                 np.abs(self.swirl_or_zero).max(initial=0.0)]
        return float(max(parts))

    def to_vector(self) -> np.ndarray:
        return VectorLayout(self.grid).pack(self)

    @classmethod
    def from_vector(cls, grid: StaggeredGrid2D, vec) -> "VelocityField":
        return VectorLayout(grid).unpack(vec)

    def __add__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField.from_vector(self.grid, self.to_vector() + other.to_vector())

    def scaled(self, factor: float) -> "VelocityField":
        return VelocityField.from_vector(self.grid, factor * self.to_vector())


class VectorLayout:
    """Flat ordering of every velocity datum: faces, swirl cells, wall traces."""

    def __init__(self, grid: StaggeredGrid2D):
        n1, n2 = grid.n1, grid.n2
        self.grid = grid
        sizes = [
            ("u1", (n1 + 1) * n2), ("u2", n1 * (n2 + 1)), ("s", n1 * n2),
            ("t_left", n2 + 1), ("t_right", n2 + 1), ("t_bottom", n1 + 1), ("t_top", n1 + 1),
            ("s_left", n2), ("s_right", n2), ("s_bottom", n1), ("s_top", n1),
        ]
        self.offsets = {}
        off = 0
        for name, size in sizes:
            self.offsets[name] = (off, size)
            off += size
        self.size = off

    def index(self, name: str, *idx):
        off, size = self.offsets[name]
        n1, n2 = self.grid.n1, self.grid.n2
        shapes = {"u1": (n1 + 1, n2), "u2": (n1, n2 + 1), "s": (n1, n2)}
        if name in shapes:
            return off + np.ravel_multi_index(tuple(np.asarray(i) for i in idx), shapes[name])
        return off + np.asarray(idx[0])

    def block(self, vec, name: str):
        off, size = self.offsets[name]
        return vec[off:off + size]

    def pack(self, u: VelocityField) -> np.ndarray:
        parts = [u.u1.ravel(), u.u2.ravel(), u.swirl_or_zero.ravel()]
        parts += [u.traces.tangential[w] for w in WALLS]
        parts += [u.traces.swirl[w] for w in WALLS]
        return np.concatenate(parts)

    def unpack(self, vec) -> VelocityField:
        vec = np.asarray(vec, dtype=float)
        g = self.grid
        tr = WallTraces({w: self.block(vec, "t_" + w).copy() for w in WALLS},
                        {w: self.block(vec, "s_" + w).copy() for w in WALLS})
        return VelocityField(g, self.block(vec, "u1").reshape(g.shape_faces1).copy(),
                             self.block(vec, "u2").reshape(g.shape_faces2).copy(),
                             self.block(vec, "s").reshape(g.shape_cells).copy(), tr)


@dataclass
class DensityField:
    grid: StaggeredGrid2D
    values: np.ndarray
    closure_tag: ClosureTag = ClosureTag.EXPLICIT

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape_cells:
            raise ValueError("density must be cell-centred")


# --------------------------------------------------------------------------
# flux weights shared by every kernel

def face_flux_weights(grid: StaggeredGrid2D):
    """Weights turning face velocities into stream-function increments.

    ``phi[i, j+1] - phi[i, j] = q1[i, j] * h2`` and
    ``phi[i+1, j] - phi[i, j] = -q2[i, j] * h1`` with ``q = weight * u``.
    """
    coord = grid.coord
    x1n, x2n = grid.x1_nodes, grid.x2_nodes
    x1c, x2c = grid.x1_centers, grid.x2_centers
    if coord is CART:
        return np.ones(grid.shape_faces1), np.ones(grid.shape_faces2)
    if coord is CYL:
        w1 = np.repeat(x1n[:, None], grid.n2, axis=1)
        w2 = np.repeat(x1c[:, None], grid.n2 + 1, axis=1)
        return w1, w2
    w1 = np.outer(x1n**2, np.sin(x2c))
    w2 = np.outer(x1c, np.sin(x2n))
    return w1, w2


def _cell_divergence_weight(grid: StaggeredGrid2D):
    """Divides the net weighted face flux to give the divergence at centres."""
    x1c, x2c = grid.x1_centers, grid.x2_centers
    if grid.coord is CART:
        return np.ones(grid.shape_cells)
    if grid.coord is CYL:
        return np.repeat(x1c[:, None], grid.n2, axis=1)
    return np.outer(x1c**2, np.sin(x2c))


def _axis_nodes(grid: StaggeredGrid2D):
    """Node index sets lying on a coordinate singularity."""
    out = []
    if grid.coord in (CYL, SPH) and grid.domain.extent1[0] == 0.0:
        out.append(("left", np.s_[0, :]))
    if grid.coord is SPH:
        s = np.sin(grid.x2_nodes)
        if s[0] < POLAR_FLOOR:
            out.append(("bottom", np.s_[:, 0]))
        if s[-1] < POLAR_FLOOR:
            out.append(("top", np.s_[:, -1]))
    return out


# --------------------------------------------------------------------------
# operations

def velocity_from_stream(phi: StreamFunctionField, swirl=None, traces=None, check_axis: bool = True) -> VelocityField:
    """Face velocities from node differences of the stream function.

    Faces on a symmetry axis carry zero normal velocity.  Wall traces default to
    second-order extrapolation of the nearest tangential faces.
    """
    grid = phi.grid
    p = phi.values
    if check_axis:
        for _, sl in _axis_nodes(grid):
            edge = p[sl]
            scale = max(np.abs(p).max(), 1.0)
            if np.ptp(edge) > 1e-12 * scale:
                raise ValueError("stream function is not constant along the symmetry axis")
    w1, w2 = face_flux_weights(grid)
    d2 = (p[:, 1:] - p[:, :-1]) / grid.h2
    d1 = (p[1:, :] - p[:-1, :]) / grid.h1
    with np.errstate(divide="ignore", invalid="ignore"):
        u1 = np.where(w1 > 0, d2 / np.where(w1 > 0, w1, 1.0), 0.0)
        u2 = np.where(w2 > 0, -d1 / np.where(w2 > 0, w2, 1.0), 0.0)
    if grid.coord is SPH:
        u2[:, np.sin(grid.x2_nodes) < POLAR_FLOOR] = 0.0
    if grid.coord is CYL and grid.domain.extent1[0] == 0.0:
        u1[0, :] = 0.0
    sw = None if swirl is None else np.array(swirl, dtype=float)
    u = VelocityField(grid, u1, u2, sw)
    u.traces = traces.copy() if traces is not None else extrapolated_traces(u)
    return u


def extrapolated_traces(u: VelocityField) -> WallTraces:
    tr = WallTraces.zeros(u.grid)
    u1, u2, s = u.u1, u.u2, u.swirl_or_zero

    def ext(a0, a1):
        return 1.5 * a0 - 0.5 * a1

    tr.tangential["left"] = ext(u2[0, :], u2[1, :])
    tr.tangential["right"] = ext(u2[-1, :], u2[-2, :])
    tr.tangential["bottom"] = ext(u1[:, 0], u1[:, 1])
    tr.tangential["top"] = ext(u1[:, -1], u1[:, -2])
    tr.swirl["left"] = ext(s[0, :], s[1, :])
    tr.swirl["right"] = ext(s[-1, :], s[-2, :])
    tr.swirl["bottom"] = ext(s[:, 0], s[:, 1])
    tr.swirl["top"] = ext(s[:, -1], s[:, -2])
    return tr


def divergence_residual(u: VelocityField) -> np.ndarray:
    grid = u.grid
    w1, w2 = face_flux_weights(grid)
    q1 = w1 * u.u1
    q2 = w2 * u.u2
    net = (q1[1:, :] - q1[:-1, :]) / grid.h1 + (q2[:, 1:] - q2[:, :-1]) / grid.h2
    return net / _cell_divergence_weight(grid)


def _weighted_imbalance(u: VelocityField):
    grid = u.grid
    w1, w2 = face_flux_weights(grid)
    q1 = w1 * u.u1
    q2 = w2 * u.u2
    net = (q1[1:, :] - q1[:-1, :]) * grid.h2 + (q2[:, 1:] - q2[:, :-1]) * grid.h1
    scale = np.abs(q1).max(initial=0.0) * grid.h2 + np.abs(q2).max(initial=0.0) * grid.h1
    return q1, q2, net, scale


def stream_from_velocity(u: VelocityField, gauge_node=(0, 0), gauge_value: float = 0.0,
                         tol: float = 1e-12) -> StreamFunctionField:
    """Recover the stream function by path integration of the weighted fluxes."""
    grid = u.grid
    q1, q2, net, scale = _weighted_imbalance(u)
    if scale > 0 and np.abs(net).max() > tol * scale * 4:
        raise ValueError(f"velocity is not discretely divergence-free (max cell imbalance {np.abs(net).max():.3e})")
    total = boundary_flux(u, "ALL") / grid.coord.azimuthal_measure
    if scale > 0 and abs(total) > tol * scale * (grid.n1 + grid.n2) * 2:
        raise ValueError(f"net boundary flux {total:.3e} is not zero")
    phi = np.empty(grid.shape_nodes)
    phi[0, 0] = 0.0
    phi[1:, 0] = np.cumsum(-q2[:, 0] * grid.h1)
    phi[:, 1:] = phi[:, :1] + np.cumsum(q1 * grid.h2, axis=1)
    gauge_node = tuple(gauge_node)
    phi += gauge_value - phi[gauge_node]
    phi[gauge_node] = gauge_value
    return StreamFunctionField(grid, phi, gauge_node, float(gauge_value))


def boundary_flux(u: VelocityField, component: str = "ALL") -> float:
    """Outward flux through a wall by the midpoint rule, azimuthal factor included."""
    grid = u.grid
    comps = grid.domain.boundary_components
    if component == "ALL":
        return float(sum(boundary_flux(u, c) for c in comps))
    if component not in WALLS:
        raise ValueError(f"unknown boundary component {component!r}")
    w1, w2 = face_flux_weights(grid)
    q1 = w1 * u.u1
    q2 = w2 * u.u2
    m = grid.coord.azimuthal_measure
    if component == "left":
        val = -np.sum(q1[0, :]) * grid.h2
    elif component == "right":
        val = np.sum(q1[-1, :]) * grid.h2
    elif component == "bottom":
        val = -np.sum(q2[:, 0]) * grid.h1
    else:
        val = np.sum(q2[:, -1]) * grid.h1
    return float(m * val)


def node_to_cell(values: np.ndarray) -> np.ndarray:
    return 0.25 * (values[:-1, :-1] + values[1:, :-1] + values[:-1, 1:] + values[1:, 1:])


def density_from_stream(laws: MaterialLaws, phi_total: StreamFunctionField) -> DensityField:
    vals = laws.eta(node_to_cell(phi_total.values))
    return DensityField(phi_total.grid, vals, ClosureTag.TYPE_I_ETA_OF_STREAM)


SWIRL_NAMES = ("swirl", "theta", "x3")


def density_from_coordinate(laws: MaterialLaws, grid: StaggeredGrid2D, which: str,
                            slice_value: float = 0.0, velocity: Optional[VelocityField] = None,
                            tol: float = 0.0) -> DensityField:
    """Type-II closure: density depends on a coordinate the velocity ignores.

    ``which`` is the out-of-plane coordinate (``theta``/``x3``/``swirl``), in
    which case the plane sees the single slice ``slice_value``, or, for
    Cartesian grids, the plane coordinate ``x1``/``x2`` whose velocity
    component must vanish.
    """
    which = which.lower()
    if which in SWIRL_NAMES:
        if velocity is not None and velocity.swirl is not None and np.abs(velocity.swirl).max() > tol:
            raise ValueError(f"velocity has a component along {which!r}")
        vals = np.full(grid.shape_cells, float(laws.eta(slice_value)))
        return DensityField(grid, vals, ClosureTag.TYPE_II_ETA_OF_COORDINATE)
    if which not in ("x1", "x2"):
        raise ValueError(f"unknown coordinate {which!r}")
    if grid.coord is not CART:
        raise ValueError(f"density may not depend on the plane coordinate {which!r} in {grid.coord.value} coordinates")
    if velocity is not None:
        comp = velocity.u1 if which == "x1" else velocity.u2
        if np.abs(comp).max() > tol:
            raise ValueError(f"velocity has a component along {which!r}")
    x1, x2 = grid.centers()
    vals = laws.eta(x1 if which == "x1" else x2)
    return DensityField(grid, vals, ClosureTag.TYPE_II_ETA_OF_COORDINATE)


def face_average(cell_values: np.ndarray, axis: int, mode: str = "arithmetic") -> np.ndarray:
    """Cell values averaged onto the faces normal to ``axis``; walls copy the adjacent cell."""
    c = np.moveaxis(cell_values, axis, 0)
    out = np.empty((c.shape[0] + 1,) + c.shape[1:])
    a, b = c[:-1], c[1:]
    if mode == "arithmetic":
        out[1:-1] = 0.5 * (a + b)
    elif mode == "harmonic":
        out[1:-1] = 2.0 * a * b / (a + b)
    else:
        raise ValueError(f"unknown averaging {mode!r}")
    out[0], out[-1] = c[0], c[-1]
    return np.moveaxis(out, 0, axis)


@dataclass
class MassResidual:
    values: np.ndarray
    max_norm: float
    l2_norm: float


def _advective_density_change(rho: np.ndarray, u: VelocityField) -> np.ndarray:
    """Discrete ``u . grad rho`` at cell centres.

    Each face contributes half its weighted flux times the density jump across
    it.  This is the conservative residual with arithmetic face densities minus
    ``rho div u``, so it agrees with it on solenoidal fields and vanishes
    bitwise wherever the density does not change along the flow.
    """
    grid = u.grid
    w1, w2 = face_flux_weights(grid)
    q1 = w1 * u.u1
    q2 = w2 * u.u2
    j1 = np.zeros(grid.shape_faces1)
    j1[1:-1, :] = np.diff(rho, axis=0)
    j2 = np.zeros(grid.shape_faces2)
    j2[:, 1:-1] = np.diff(rho, axis=1)
    t1 = 0.5 * q1 * j1 / grid.h1
    t2 = 0.5 * q2 * j2 / grid.h2
    net = (t1[1:, :] + t1[:-1, :]) + (t2[:, 1:] + t2[:, :-1])
    return net / _cell_divergence_weight(grid)


def _wall_extrapolated(faces: np.ndarray, cells: np.ndarray, axis: int) -> np.ndarray:
    """Wall densities carrying the same ``h^2 rho''/8`` error as interior face means.

    Copying the adjacent cell, or extrapolating exactly, leaves an O(h^2)
    mismatch with the interior faces, which the divergence turns into an O(h)
    residual in wall cells with through-flow.
    """
    m = cells.shape[axis]
    if m < 2:
        return faces
    f = np.moveaxis(faces.copy(), axis, 0)
    c = np.moveaxis(cells, axis, 0)
    if m >= 3:
        f[0] = c[0] + (c[0] - c[1]) - 0.5 * (c[1] - c[2])
        f[-1] = c[-1] + (c[-1] - c[-2]) - 0.5 * (c[-2] - c[-3])
    else:
        f[0] = c[0] + 0.5 * (c[0] - c[1])
        f[-1] = c[-1] + 0.5 * (c[-1] - c[-2])
    return np.moveaxis(f, 0, axis)


def mass_conservation_residual(rho: DensityField, u: VelocityField, average: str = "arithmetic") -> MassResidual:
    """Cellwise ``div(rho u)``.

    Densities tied to a coordinate are measured in the advective form
    ``u . grad rho`` (see :func:`_advective_density_change`).
    """
    if rho.grid != u.grid:
        raise ValueError("density and velocity live on different grids")
    grid = u.grid
    if rho.closure_tag is ClosureTag.TYPE_II_ETA_OF_COORDINATE:
        vals = _advective_density_change(rho.values, u)
    else:
        r1 = _wall_extrapolated(face_average(rho.values, 0, average), rho.values, 0)
        r2 = _wall_extrapolated(face_average(rho.values, 1, average), rho.values, 1)
        vals = divergence_residual(VelocityField(grid, r1 * u.u1, r2 * u.u2))
    if grid.coord is SPH:
        vals = np.where(np.sin(grid.x2_centers)[None, :] > POLAR_FLOOR, vals, 0.0)
    l2 = float(np.sqrt(np.sum(vals**2 * grid.cell_volumes())))
    return MassResidual(vals, float(np.abs(vals).max()), l2)


def streamline_face_density(eta, phi: StreamFunctionField, samples: int = 4097):
    """Face densities averaged over the stream-function interval each face spans.

    With ``H`` an antiderivative of ``eta`` the mass flux through a face is
    ``H(phi_b) - H(phi_a)``, so fluxes cancel around every cell whatever the
    quadrature used for ``H``.  Returns the face-1 and face-2 arrays.
    """
    from scipy.integrate import cumulative_trapezoid

    p = phi.values
    lo, hi = float(p.min()), float(p.max())
    if hi - lo <= 0.0:
        g = phi.grid
        val = float(eta(lo))
        return np.full(g.shape_faces1, val), np.full(g.shape_faces2, val)
    s = np.linspace(lo, hi, samples)
    H = cumulative_trapezoid(np.asarray(eta(s), dtype=float), s, initial=0.0)

    def mean(a, b):
        d = b - a
        tiny = np.abs(d) <= 1e-12 * (hi - lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            avg = (np.interp(b, s, H) - np.interp(a, s, H)) / d
        return np.where(tiny, np.asarray(eta(0.5 * (a + b)), dtype=float), avg)

    # face-1 (i, j) spans nodes (i, j)..(i, j+1); face-2 (i, j) spans (i, j)..(i+1, j)
    return mean(p[:, :-1], p[:, 1:]), mean(p[:-1, :], p[1:, :])


def streamline_mass_residual(eta, phi: StreamFunctionField, u: VelocityField) -> MassResidual:
    """``div(rho u)`` for ``rho = eta(phi)`` with :func:`streamline_face_density` on faces.

    Vanishes to rounding when ``u`` is the discrete curl of ``phi``.
    """
    if phi.grid != u.grid:
        raise ValueError("stream function and velocity live on different grids")
    grid = u.grid
    r1, r2 = streamline_face_density(eta, phi)
    vals = divergence_residual(VelocityField(grid, r1 * u.u1, r2 * u.u2))
    l2 = float(np.sqrt(np.sum(vals**2 * grid.cell_volumes())))
    return MassResidual(vals, float(np.abs(vals).max()), l2)
