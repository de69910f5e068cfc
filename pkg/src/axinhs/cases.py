"""Built-in problems: reference flows, the regression cavity and manufactured cases."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import VelocityField
from .grid import DomainSpec, StaggeredGrid2D, build_grid
from .manufactured import ManufacturedCase, forcing_on_grid, manufactured_case
from .materials import MaterialLaw, MaterialLaws
from .oracles import LayeredChannelSolution, RadialSwirlSolution, layered_channel_oracle, radial_swirl_oracle
from .solver import Problem, SolutionBundle
from .weakform import BoundaryData, ForcingField, operators_for

CHANNEL_VARIANTS = ("couette", "couette-swirl", "poiseuille", "poiseuille-swirl")


@dataclass
class ChannelCase:
    problem: Problem
    oracle: LayeredChannelSolution
    variant: str


def _two_layer_laws() -> MaterialLaws:
    eta = MaterialLaw.from_table([(0.0, 1.0), (0.5, 2.0)], 1.0, 2.0, "constant")
    b = MaterialLaw.from_table([(1.0, 1.0), (2.0, 2.0)], 1.0, 2.0, "linear")
    return MaterialLaws(eta, b)


def _linear_laws() -> MaterialLaws:
    eta = MaterialLaw.from_table([(0.0, 1.0), (1.0, 2.0)], 1.0, 2.0, "linear")
    b = MaterialLaw.from_table([(1.0, 1.0), (2.0, 2.0)], 1.0, 2.0, "linear")
    return MaterialLaws(eta, b)


def developed_profile(grid: StaggeredGrid2D, mu_cells, ends, flux: float, mode: str = "arithmetic") -> np.ndarray:
    """Discrete fully developed ``u1(x2)`` with wall values ``ends`` and flow rate ``flux``.

    The viscous operator is restricted to fields that do not vary along ``x1``
    and tested on one interior column; a constant multiplier plays the role of
    the pressure gradient.  Feeding this profile through inflow and outflow
    walls makes the discrete solution exactly layered.
    """
    ops = operators_for(grid)
    L = ops.layout
    n1, n2 = grid.n1, grid.n2
    Z0 = np.zeros(L.size)
    L.block(Z0, "t_bottom")[:] = ends[0]
    L.block(Z0, "t_top")[:] = ends[1]
    cols = np.concatenate([L.index("u1", np.arange(n1 + 1), np.full(n1 + 1, j)) for j in range(n2)])
    B = sp.csr_matrix((np.ones(cols.size), (cols, np.repeat(np.arange(n2), n1 + 1))), shape=(L.size, n2))
    rows = L.index("u1", np.full(n2, n1 // 2), np.arange(n2))
    M = ops.viscous_matrix(mu_cells, mode, wall_closure=True)[rows]
    w = ops.load_weights[rows]
    K = sp.bmat([[M @ B, -w[:, None]], [np.full((1, n2), grid.h2), None]]).tocsc()
    rhs = np.concatenate([-(M @ Z0), [flux]])
    return spla.spsolve(K, rhs)[:n2]


def layered_channel_case(n: int, variant: str = "couette", pressure_gradient: float = -2.0,
                         face_average: str = "arithmetic") -> ChannelCase:
    """Shear layers across ``x2`` in a Cartesian box, density following ``x2``.

    The in-plane component rides on inflow/outflow profiles; the out-of-plane
    one is carried by the swirl slot and driven by a constant body force.  A
    constant in-plane force is a pure gradient, so the in-plane flow is set by
    its inflow data, which take the discrete developed profile
    (:func:`developed_profile`, for the given face averaging) with the oracle's
    flow rate.
    """
    if variant not in CHANNEL_VARIANTS:
        raise ValueError(f"unknown channel variant {variant!r}")
    grid = build_grid(DomainSpec("cartesian", (0.0, 1.0), (0.0, 1.0)), n, n)
    swirl = variant.endswith("swirl")
    if variant.startswith("couette"):
        laws = _two_layer_laws()
        mu = lambda s: np.where(np.asarray(s) < 0.5, 1.0, 2.0)
        bps, C, ends = (0.5,), 0.0, (0.0, 1.0)
    else:
        laws = _linear_laws()
        mu = lambda s: 1.0 + np.asarray(s, dtype=float)
        bps, C, ends = (), pressure_gradient, (0.0, 0.0)
    bc = ((0.0, 0.0), ends) if swirl else (ends, (0.0, 0.0))
    Cs = (0.0, C) if swirl else (C, 0.0)
    oracle = layered_channel_oracle(mu, Cs[0], Cs[1], 0.0, 1.0, bc, samples=grid.x2_centers, breakpoints=bps)
    if swirl:
        bd = BoundaryData.from_functions(grid, swirl=lambda x1, x2: oracle.velocity(1, x2))
    else:
        bd = BoundaryData.from_functions(grid, u1=lambda x1, x2: oracle.velocity(0, x2))
        mu_cells = laws.b(laws.eta(grid.centers()[1]))
        flux = float(np.sum(bd.normal["left"]) * grid.h2)
        prof = developed_profile(grid, mu_cells, ends, flux, face_average)
        bd.normal["left"] = prof.copy()
        bd.normal["right"] = prof.copy()
    forcing = ForcingField.constant(grid, -Cs[0], 0.0, -Cs[1])
    problem = Problem(grid, laws, bd, forcing, closure="coordinate:x2", name=f"channel-{variant}")
    return ChannelCase(problem, oracle, variant)


def channel_error(bundle: SolutionBundle, case: ChannelCase) -> float:
    """Relative discrete L2 error of the layered component."""
    g = bundle.u_total.grid
    if case.variant.endswith("swirl"):
        exact = np.broadcast_to(case.oracle.velocity(1, g.x2_centers), g.shape_cells)
        got = bundle.u_total.swirl
    else:
        exact = np.broadcast_to(case.oracle.velocity(0, g.x2_centers), g.shape_faces1)
        got = bundle.u_total.u1
    return float(np.linalg.norm(got - exact) / np.linalg.norm(exact))


@dataclass
class AnnulusCase:
    problem: Problem
    oracle: RadialSwirlSolution


def annulus_swirl_case(n: int, n2: int = 4, mu=1.0, C: float = 0.0, g_a: float = 0.0, g_b: float = 1.0,
                       r_a: float = 1.0, r_b: float = 2.0, breakpoints=()) -> AnnulusCase:
    """Swirl ``u_theta = r g(r)`` between rotating cylinders, uniform in ``z``.

    Constant ``mu`` runs through the material laws; a profile ``mu(r)`` is
    imposed cellwise through the explicit closure.
    """
    grid = build_grid(DomainSpec("cylindrical", (r_a, r_b), (0.0, 1.0)), n, n2)
    oracle = radial_swirl_oracle(mu, C, r_a, r_b, g_a, g_b, samples=grid.x1_centers, breakpoints=breakpoints)
    ends = {r_a: r_a * g_a, r_b: r_b * g_b}

    def swirl(x1, x2):
        x1 = np.asarray(x1, dtype=float)
        flat = x1.ravel()
        out = np.array([ends[v] if v in ends else v * oracle(v)[0] for v in flat])
        return out.reshape(x1.shape)

    bd = BoundaryData.from_functions(grid, swirl=swirl)
    r_c = grid.centers()[0]
    forcing = ForcingField(grid, 0.0, 0.0, C / r_c)
    if callable(mu):
        problem = Problem(grid, None, bd, forcing, closure="explicit", rho=np.ones(grid.shape_cells),
                          mu=mu(r_c), name="annulus-swirl")
    else:
        laws = MaterialLaws(MaterialLaw.constant(1.0), MaterialLaw.constant(float(mu)))
        problem = Problem(grid, laws, bd, forcing, closure="stream", name="annulus-swirl")
    return AnnulusCase(problem, oracle)


def annulus_error(bundle: SolutionBundle, case: AnnulusCase) -> float:
    g = bundle.u_total.grid
    exact = np.broadcast_to((g.x1_centers * case.oracle.g)[:, None], g.shape_cells)
    return float(np.linalg.norm(bundle.u_total.swirl - exact) / np.linalg.norm(exact))


def cavity_problem(n: int = 64, mu_low: float = 0.2, step: float = -5e-4) -> Problem:
    """Swirling lid over a closed cylinder: ``u_theta = r`` on the top, other walls at rest.

    Density takes two values across the stream-function level ``step``; the
    viscosity is linear in density.  Reynolds number ``rho_max * |u0| * L / mu_min``
    is 10 by default.
    """
    grid = build_grid(DomainSpec("cylindrical", (0.0, 1.0), (0.0, 1.0)), n, n)
    bd = BoundaryData.from_functions(grid, swirl=lambda r, z: r, walls=("top",))
    # right-closed step: s >= step gives 2, below gives 1
    eta = MaterialLaw.from_table([(step - 1.0, 1.0), (step, 2.0)], 1.0, 2.0, "constant")
    b = MaterialLaw.from_table([(1.0, mu_low), (2.0, 2 * mu_low)], mu_low, 2 * mu_low, "linear")
    return Problem(grid, MaterialLaws(eta, b), bd, closure="stream", name="cavity")


def zero_problem(n: int = 16, coord: str = "cylindrical") -> Problem:
    ext1 = (0.0, 1.0)
    grid = build_grid(DomainSpec(coord, ext1, (0.0, 1.0)), n, n)
    laws = MaterialLaws(MaterialLaw.constant(1.0), MaterialLaw.constant(1.0))
    return Problem(grid, laws, BoundaryData.zeros(grid), name="zero")


# --------------------------------------------------------------------------
# manufactured problems

def manufactured_problem(case: ManufacturedCase, n: int, delta: Optional[float] = None) -> Problem:
    grid = build_grid(case.domain, n, n)
    u1, u2, u3 = case.velocity_fns
    bd = BoundaryData.from_functions(grid, u1=u1, u2=u2, swirl=u3 if case.has_swirl else None,
                                     gauge=float(case.phi_fn(grid.domain.extent1[0], grid.domain.extent2[0])))
    return Problem(grid, case.laws(), bd, forcing_on_grid(case, grid), delta=delta, closure="stream",
                   name=case.name)


def interpolant_vector(case: ManufacturedCase, grid: StaggeredGrid2D) -> np.ndarray:
    """Exact velocity sampled at the unknown positions: faces, cells and wall traces.

    Point samples, not face fluxes of the exact stream function: the two differ
    by ``h^2 u''/24``, which does not vanish on walls and would cap the
    measured H^1 order at 3/2.
    """
    f1, f2, f3 = case.velocity_fns
    bd = BoundaryData.from_functions(grid, u1=f1, u2=f2, swirl=f3 if case.has_swirl else None)
    u = VelocityField.zeros(grid)
    u.u1 = f1(*grid.faces1())
    if grid.domain.has_axis:
        u.u1[0, :] = 0.0
    u.u2 = f2(*grid.faces2())
    u.u1[0, :], u.u1[-1, :] = bd.normal["left"], bd.normal["right"]
    u.u2[:, 0], u.u2[:, -1] = bd.normal["bottom"], bd.normal["top"]
    u.traces = bd.traces
    u.swirl = f3(*grid.centers()) if case.has_swirl else np.zeros(grid.shape_cells)
    return u.to_vector()


def projected_interpolant(bundle: SolutionBundle, case: ManufacturedCase) -> np.ndarray:
    """Closest admissible field to the point samples in the discrete H^1 norm.

    Admissible fields share the solver's boundary lift and are discretely
    divergence free.  Point samples are not, and their divergence next to the
    axis decays only like ``h^2 log h`` in H^1, which would otherwise swamp the
    solver error in the measured order.
    """
    grid = bundle.u_total.grid
    ops = operators_for(grid)
    Z = interpolant_vector(case, grid)
    Z0 = bundle.u_total.to_vector() - ops.E @ bundle.dofs
    A1 = ops.viscous_matrix(np.ones(grid.shape_cells))
    x = spla.spsolve(ops.unit_norm_matrix().tocsc(), ops.ET @ (A1 @ (Z - Z0)))
    return Z0 + ops.E @ x


def manufactured_error(bundle: SolutionBundle, case: ManufacturedCase,
                       reference: str = "projected") -> tuple[float, float]:
    """Discrete H^1 error, absolute and relative.

    ``reference="projected"`` compares with :func:`projected_interpolant`,
    ``"pointwise"`` with the raw samples of :func:`interpolant_vector`.
    """
    grid = bundle.u_total.grid
    ops = operators_for(grid)
    if reference == "projected":
        exact = projected_interpolant(bundle, case)
    elif reference == "pointwise":
        exact = interpolant_vector(case, grid)
    else:
        raise ValueError(f"unknown reference {reference!r}")
    e = bundle.u_total.to_vector() - exact
    A1 = ops.viscous_matrix(np.ones(grid.shape_cells))
    err = float(np.sqrt(max(e @ (A1 @ e), 0.0)))
    ref = float(np.sqrt(max(exact @ (A1 @ exact), 0.0)))
    return err, err / ref if ref > 0 else err


def observed_orders(errors, ns) -> list[float]:
    e = np.asarray(errors, dtype=float)
    n = np.asarray(ns, dtype=float)
    return list(np.log(e[:-1] / e[1:]) / np.log(n[1:] / n[:-1]))


NAMED_CASES = ("cavity", "zero", "annulus-swirl") + tuple("channel-" + v for v in CHANNEL_VARIANTS)
