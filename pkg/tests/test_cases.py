from __future__ import annotations

import numpy as np
import pytest
import sympy as sp

from axinhs.cases import (
    annulus_error,
    annulus_swirl_case,
    channel_error,
    developed_profile,
    layered_channel_case,
    manufactured_error,
    manufactured_problem,
    observed_orders,
)
from axinhs.fields import divergence_residual
from axinhs.manufactured import CATALOG, manufactured_case
from axinhs.solver import SolverConfig, fixed_point_solve

R, Z = sp.symbols("x1 x2", real=True)


@pytest.mark.parametrize("name", list(CATALOG))
def test_manufactured_velocity_is_solenoidal(name):
    mc = manufactured_case(name)
    u1, u2, _ = mc.velocity
    if mc.domain.coord.value == "cylindrical":
        div = sp.diff(R * u1, R) / R + sp.diff(u2, Z)
    else:
        div = sp.diff(u1, R) + sp.diff(u2, Z)
    assert sp.simplify(div) == 0


@pytest.mark.parametrize("name", list(CATALOG))
def test_manufactured_laws_respect_bounds(name):
    mc = manufactured_case(name)
    laws = mc.laws()
    s = np.linspace(-2.0, 2.0, 101)
    lo, hi = laws.rho_bounds
    assert np.all(laws.eta(s) >= lo) and np.all(laws.eta(s) <= hi)


def test_unknown_manufactured_case():
    with pytest.raises(ValueError):
        manufactured_case("teapot")


def test_manufactured_solution_is_discretely_solenoidal():
    b = fixed_point_solve(manufactured_problem(manufactured_case("cyl-smooth"), 16))
    u = b.u_total
    assert np.abs(divergence_residual(u)).max() * u.grid.h1 / u.norm() < 1e-13
    abs_err, rel_err = manufactured_error(b, manufactured_case("cyl-smooth"))
    assert rel_err < 0.05
    pt, _ = manufactured_error(b, manufactured_case("cyl-smooth"), reference="pointwise")
    assert pt >= abs_err


def test_swirl_rigid_is_reproduced():
    mc = manufactured_case("swirl-rigid")
    b = fixed_point_solve(manufactured_problem(mc, 16), SolverConfig(picard_tol=1e-10))
    assert manufactured_error(b, mc)[0] < 1e-10


def test_developed_profile_matches_parabola_shape():
    case = layered_channel_case(32, "poiseuille")
    g = case.problem.grid
    prof = case.problem.boundary.normal["left"]
    exact = case.oracle.velocity(0, g.x2_centers)
    assert np.sum(prof) == pytest.approx(np.sum(exact), rel=1e-12)
    assert np.abs(prof - exact).max() < 5e-3 * exact.max()
    mu = np.ones(g.shape_cells)
    flat = developed_profile(g, mu, (0.0, 0.0), 1.0 / 6.0)
    assert np.abs(flat - g.x2_centers * (1 - g.x2_centers)).max() < 1e-2


def test_channel_solution_is_layered():
    case = layered_channel_case(16, "poiseuille")
    b = fixed_point_solve(case.problem)
    u = b.u_total
    assert np.ptp(u.u1, axis=0).max() < 1e-9
    assert np.abs(u.u2).max() < 1e-9
    assert channel_error(b, case) < 5e-3


def test_harmonic_couette_is_exact():
    case = layered_channel_case(16, "couette", face_average="harmonic")
    b = fixed_point_solve(case.problem, SolverConfig(face_average="harmonic"))
    assert channel_error(b, case) < 1e-8


def test_annulus_case():
    case = annulus_swirl_case(16)
    b = fixed_point_solve(case.problem)
    assert annulus_error(b, case) < 1e-4
    assert case.oracle(1.5)[0] == pytest.approx(20 / 27, abs=1e-12)


def test_observed_orders():
    assert observed_orders([4.0, 1.0, 0.25], [8, 16, 32]) == pytest.approx([2.0, 2.0])
