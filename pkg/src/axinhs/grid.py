"""Coordinate systems, domains and the MAC-staggered grid of a symmetry plane.

Layout on an ``n1 x n2`` grid:

* scalars (density, viscosity, swirl) at cell centres, shape ``(n1, n2)``
* stream function at nodes (cell corners), shape ``(n1 + 1, n2 + 1)``
* first in-plane component on faces normal to direction 1, ``(n1 + 1, n2)``
* second in-plane component on faces normal to direction 2, ``(n1, n2 + 1)``

Integrals carry the metric weight of the coordinate system (``r`` for
cylindrical, ``1`` for Cartesian, ``r^2 sin(alpha)`` for spherical).  The
azimuthal factor ``2 pi`` is left out of volume forms; it is a common factor of
every term of the integral identity.  Physical fluxes include it.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

WALLS = ("left", "right", "bottom", "top")


class CoordinateSystem(enum.Enum):
    CYLINDRICAL_RZ = "cylindrical"
    CARTESIAN_XY = "cartesian"
    SPHERICAL_RALPHA = "spherical"

    @classmethod
    def parse(cls, value) -> "CoordinateSystem":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "cylindrical": cls.CYLINDRICAL_RZ, "cylindricalrz": cls.CYLINDRICAL_RZ, "rz": cls.CYLINDRICAL_RZ,
            "cartesian": cls.CARTESIAN_XY, "cartesianxy": cls.CARTESIAN_XY, "xy": cls.CARTESIAN_XY,
            "spherical": cls.SPHERICAL_RALPHA, "sphericalralpha": cls.SPHERICAL_RALPHA,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown coordinate system {value!r}") from None

    @property
    def azimuthal_measure(self) -> float:
        return 1.0 if self is CoordinateSystem.CARTESIAN_XY else 2.0 * np.pi


@dataclass(frozen=True)
class DomainSpec:
    """Rectangle ``extent1 x extent2`` in the symmetry plane."""

    coord: CoordinateSystem
    extent1: tuple[float, float]
    extent2: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "coord", CoordinateSystem.parse(self.coord))
        a1, b1 = map(float, self.extent1)
        a2, b2 = map(float, self.extent2)
        object.__setattr__(self, "extent1", (a1, b1))
        object.__setattr__(self, "extent2", (a2, b2))
        if not (b1 > a1 and b2 > a2):
            raise ValueError(f"degenerate extents {self.extent1} x {self.extent2}")
        if self.coord is CoordinateSystem.CYLINDRICAL_RZ and a1 < 0:
            raise ValueError("cylindrical domain needs r >= 0")
        if self.coord is CoordinateSystem.SPHERICAL_RALPHA:
            if a1 < 0:
                raise ValueError("spherical domain needs radius >= 0")
            if a2 < 0 or b2 > np.pi + 1e-14:
                raise ValueError("spherical polar angle must lie in [0, pi]")

    @property
    def has_axis(self) -> bool:
        """Left edge is the symmetry axis r = 0 (not a physical wall)."""
        return self.coord is CoordinateSystem.CYLINDRICAL_RZ and self.extent1[0] == 0.0

    @property
    def boundary_components(self) -> tuple[str, ...]:
        if self.has_axis:
            return ("right", "bottom", "top")
        return WALLS

    @property
    def lengths(self) -> tuple[float, float]:
        return (self.extent1[1] - self.extent1[0], self.extent2[1] - self.extent2[0])


def _interval_weight(coord: CoordinateSystem, lo, hi, axis: int):
    """Exact integral of the metric weight factor over ``[lo, hi]`` along ``axis``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if coord is CoordinateSystem.CARTESIAN_XY:
        return hi - lo
    if coord is CoordinateSystem.CYLINDRICAL_RZ:
        return 0.5 * (hi**2 - lo**2) if axis == 0 else hi - lo
    # spherical: r^2 dr and sin(alpha) dalpha
    if axis == 0:
        return (hi**3 - lo**3) / 3.0
    return np.cos(lo) - np.cos(hi)


@dataclass(frozen=True)
class StaggeredGrid2D:
    domain: DomainSpec
    n1: int
    n2: int
    h1: float = field(init=False)
    h2: float = field(init=False)

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError(f"need at least 2 cells per direction, got {self.n1} x {self.n2}")
        l1, l2 = self.domain.lengths
        object.__setattr__(self, "h1", l1 / self.n1)
        object.__setattr__(self, "h2", l2 / self.n2)

    @property
    def coord(self) -> CoordinateSystem:
        return self.domain.coord

    # 1D coordinate arrays
    @property
    def x1_nodes(self) -> np.ndarray:
        a = self.domain.extent1[0]
        return a + self.h1 * np.arange(self.n1 + 1)

    @property
    def x2_nodes(self) -> np.ndarray:
        a = self.domain.extent2[0]
        return a + self.h2 * np.arange(self.n2 + 1)

    @property
    def x1_centers(self) -> np.ndarray:
        return self.domain.extent1[0] + self.h1 * (np.arange(self.n1) + 0.5)

    @property
    def x2_centers(self) -> np.ndarray:
        return self.domain.extent2[0] + self.h2 * (np.arange(self.n2) + 0.5)

    # 2D coordinate pairs per location family
    def centers(self):
        return np.meshgrid(self.x1_centers, self.x2_centers, indexing="ij")

    def nodes(self):
        return np.meshgrid(self.x1_nodes, self.x2_nodes, indexing="ij")

    def faces1(self):
        return np.meshgrid(self.x1_nodes, self.x2_centers, indexing="ij")

    def faces2(self):
        return np.meshgrid(self.x1_centers, self.x2_nodes, indexing="ij")

    @property
    def shape_cells(self):
        return (self.n1, self.n2)

    @property
    def shape_nodes(self):
        return (self.n1 + 1, self.n2 + 1)

    @property
    def shape_faces1(self):
        return (self.n1 + 1, self.n2)

    @property
    def shape_faces2(self):
        return (self.n1, self.n2 + 1)

    def metric(self, x1, x2):
        """Pointwise metric weight w."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if self.coord is CoordinateSystem.CARTESIAN_XY:
            return np.ones(np.broadcast(x1, x2).shape)
        if self.coord is CoordinateSystem.CYLINDRICAL_RZ:
            return x1 + 0.0 * x2
        return x1**2 * np.sin(x2)

    # Integrated metric over the control volumes attached to each location.
    def _dual_1d(self, axis: int, at_nodes: bool):
        if axis == 0:
            n, h, (a, b) = self.n1, self.h1, self.domain.extent1
        else:
            n, h, (a, b) = self.n2, self.h2, self.domain.extent2
        if at_nodes:
            x = a + h * np.arange(n + 1)
            lo = np.maximum(x - 0.5 * h, a)
            hi = np.minimum(x + 0.5 * h, b)
            lo[0], hi[-1] = a, b
        else:
            lo = a + h * np.arange(n)
            hi = lo + h
            hi[-1] = b
        return _interval_weight(self.coord, lo, hi, axis)

    def cell_volumes(self) -> np.ndarray:
        return np.outer(self._dual_1d(0, False), self._dual_1d(1, False))

    def node_volumes(self) -> np.ndarray:
        return np.outer(self._dual_1d(0, True), self._dual_1d(1, True))

    def face1_volumes(self) -> np.ndarray:
        return np.outer(self._dual_1d(0, True), self._dual_1d(1, False))

    def face2_volumes(self) -> np.ndarray:
        return np.outer(self._dual_1d(0, False), self._dual_1d(1, True))


def build_grid(domain: DomainSpec, n1: int, n2: int) -> StaggeredGrid2D:
    if int(n1) != n1 or int(n2) != n2:
        raise ValueError("cell counts must be integers")
    return StaggeredGrid2D(domain, int(n1), int(n2))
