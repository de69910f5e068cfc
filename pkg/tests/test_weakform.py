from __future__ import annotations

import numpy as np
import pytest

from axinhs.fields import DensityField, VelocityField, boundary_flux
from axinhs.grid import DomainSpec, build_grid
from axinhs.weakform import (
    BoundaryData,
    ForcingField,
    assemble_convection,
    assemble_viscous,
    build_cutoff,
    default_delta,
    extend_boundary_data,
    operators_for,
    strong_residual_forcing,
    weak_residual,
)

CART01 = DomainSpec("cartesian", (0.0, 1.0), (0.0, 1.0))
CYL01 = DomainSpec("cylindrical", (0.0, 1.0), (0.0, 1.0))


def field_from(grid, u1=None, u2=None, swirl=None):
    """Velocity sampled everywhere, traces included."""
    bd = BoundaryData.from_functions(grid, u1=u1, u2=u2, swirl=swirl)
    z = lambda f, xy: np.zeros(xy[0].shape) if f is None else f(*xy) + 0.0 * xy[0]
    u = VelocityField(grid, z(u1, grid.faces1()), z(u2, grid.faces2()), z(swirl, grid.centers()), bd.traces.copy())
    if grid.domain.has_axis:
        u.u1[0, :] = 0.0
    return u


# cutoff -----------------------------------------------------------------------

def test_cutoff_plateaus():
    cut = build_cutoff(CART01, 0.2)
    assert cut.evaluate(0.05, 0.5) == 1.0
    assert cut.evaluate(0.3, 0.5) == 0.0
    assert cut.evaluate(0.5, 0.5) == 0.0


@pytest.mark.parametrize("delta", [0.05, 0.1, 0.2])
def test_cutoff_range_and_gradient(delta):
    cut = build_cutoff(CYL01, delta)
    assert cut.nodes.min() >= 0.0 and cut.nodes.max() <= 1.0
    assert cut.grad_constant <= 4.0


def test_cutoff_ignores_symmetry_axis():
    cut = build_cutoff(CYL01, 0.2)
    assert cut.evaluate(0.0, 0.5) == 0.0


def test_cutoff_width_checked():
    with pytest.raises(ValueError):
        build_cutoff(CART01, 0.6)
    with pytest.raises(ValueError):
        build_cutoff(CART01, 0.0)


# boundary extension ---------------------------------------------------------------

def test_zero_data_extends_to_zero():
    g = build_grid(CYL01, 8, 8)
    ext = extend_boundary_data(BoundaryData.zeros(g), 0.25)
    assert np.all(ext.phi0_delta.values == 0.0)
    assert np.all(ext.u0_delta.to_vector() == 0.0)


def test_pure_swirl_extension():
    g = build_grid(CYL01, 16, 16)
    bd = BoundaryData.from_functions(g, swirl=lambda r, z: 1.0 + 0.0 * r, walls=("right",))
    ext = extend_boundary_data(bd, 0.25)
    assert np.all(ext.u0_delta.u1 == 0.0) and np.all(ext.u0_delta.u2 == 0.0)
    assert np.all(ext.u0_delta.swirl[ext.cutoff.cells == 0.0] == 0.0)
    assert np.array_equal(ext.u0_delta.traces.swirl["right"], bd.traces.swirl["right"])


def test_extension_reproduces_traces_bitwise():
    g = build_grid(CART01, 16, 16)
    bd = BoundaryData.from_functions(g, u1=lambda x, y: y * (1 - y) + x, u2=lambda x, y: -y + 0.3 * np.sin(x),
                                     swirl=lambda x, y: np.cos(x + y))
    # make the net flux vanish by construction: u1 = x + ..., u2 = -y + ...
    ext = extend_boundary_data(bd, default_delta(g))
    u = ext.u0_delta
    assert np.array_equal(u.u1[0, :], bd.normal["left"]) and np.array_equal(u.u1[-1, :], bd.normal["right"])
    assert np.array_equal(u.u2[:, 0], bd.normal["bottom"]) and np.array_equal(u.u2[:, -1], bd.normal["top"])
    for w in ("left", "right", "bottom", "top"):
        assert np.array_equal(u.traces.tangential[w], bd.traces.tangential[w])
        assert np.array_equal(u.traces.swirl[w], bd.traces.swirl[w])


def test_extension_rejects_net_flux():
    g = build_grid(CART01, 8, 8)
    bd = BoundaryData.from_functions(g, u1=lambda x, y: 1.0 + 0.0 * x, walls=("left",))
    assert abs(boundary_flux(bd.as_velocity(), "ALL")) > 0
    with pytest.raises(ValueError):
        extend_boundary_data(bd, 0.25)


# viscous form ------------------------------------------------------------------------

def test_rigid_translation_has_no_energy():
    g = build_grid(CYL01, 12, 12)
    u = field_from(g, u2=lambda r, z: 1.0 + 0.0 * r)
    ops = operators_for(g)
    assert abs(ops.viscous_energy(np.ones(g.shape_cells), u.to_vector())) < 1e-12


def test_unit_shear_energy():
    g = build_grid(CART01, 16, 16)
    u = field_from(g, u1=lambda x, y: y)
    ops = operators_for(g)
    Z = u.to_vector()
    assert abs(ops.viscous_energy(np.ones(g.shape_cells), Z) - 1.0) < 1e-12
    assert abs(Z @ (ops.viscous_matrix(np.ones(g.shape_cells)) @ Z) - 1.0) < 1e-12


def test_viscous_form_linear_in_viscosity():
    g = build_grid(CYL01, 10, 10)
    rng = np.random.default_rng(0)
    mu = 1.0 + rng.random(g.shape_cells)
    A1 = assemble_viscous(mu, g)
    A2 = assemble_viscous(2.0 * mu, g)
    x = rng.standard_normal(A1.shape[0])
    assert x @ (A2 @ x) == pytest.approx(2.0 * (x @ (A1 @ x)), rel=1e-13)


def test_viscous_form_symmetric_positive():
    g = build_grid(CYL01, 10, 10)
    A = assemble_viscous(np.ones(g.shape_cells), g)
    assert abs(A - A.T).max() == 0.0
    assert np.linalg.eigvalsh(A.toarray()).min() > 0.0


def test_viscosity_bounds_enforced():
    g = build_grid(CART01, 6, 6)
    with pytest.raises(ValueError):
        assemble_viscous(np.full(g.shape_cells, 3.0), g, bounds=(1.0, 2.0))


# convection -------------------------------------------------------------------------

def test_zero_advection_gives_zero_operator():
    g = build_grid(CYL01, 8, 8)
    N = assemble_convection(DensityField(g, np.ones(g.shape_cells)), VelocityField.zeros(g))
    assert N.count_nonzero() == 0 or abs(N).max() == 0.0


def test_convection_is_skew():
    g = build_grid(CYL01, 12, 12)
    rng = np.random.default_rng(1)
    ops = operators_for(g)
    w = VelocityField.from_vector(g, ops.E @ rng.standard_normal(ops.n_dofs))
    N = assemble_convection(DensityField(g, 1.0 + rng.random(g.shape_cells)), w)
    assert abs(N + N.T).max() < 1e-15 * max(abs(N).max(), 1.0)


def test_convection_grid_mismatch():
    a, b = build_grid(CART01, 4, 4), build_grid(CART01, 8, 8)
    with pytest.raises(ValueError):
        assemble_convection(DensityField(a, np.ones(a.shape_cells)), VelocityField.zeros(b))


# residuals -----------------------------------------------------------------------------

def test_zero_solution_zero_residual():
    g = build_grid(CYL01, 8, 8)
    one = np.ones(g.shape_cells)
    assert weak_residual(DensityField(g, one), one, VelocityField.zeros(g), ForcingField.zeros(g)) == 0.0
    f = strong_residual_forcing(DensityField(g, one), one, VelocityField.zeros(g))
    assert not f.f1.any() and not f.f2.any() and not f.f3.any()


def test_rigid_rotation_forcing():
    errs = []
    for n in (16, 32, 64):
        g = build_grid(CYL01, n, n)
        one = np.ones(g.shape_cells)
        f = strong_residual_forcing(DensityField(g, one), one, field_from(g, swirl=lambda r, z: r))
        r = g.faces1()[0]
        far = r >= 0.25
        errs.append(np.abs(f.f1 + r)[far & (r < 1.0)].max())
        assert np.abs(f.f2).max() < 1e-12
        assert np.abs(f.f3).max() < 1e-11
    assert np.log2(errs[0] / errs[1]) > 1.9 and np.log2(errs[1] / errs[2]) > 1.9


def test_linear_shear_needs_no_forcing():
    g = build_grid(CART01, 16, 16)
    one = np.ones(g.shape_cells)
    f = strong_residual_forcing(DensityField(g, one), one, field_from(g, u1=lambda x, y: y))
    assert np.abs(f.f1).max() < 1e-11 and np.abs(f.f2).max() < 1e-11


def test_weak_residual_trace_mismatch():
    g = build_grid(CART01, 6, 6)
    one = np.ones(g.shape_cells)
    other = field_from(g, u1=lambda x, y: y)
    with pytest.raises(ValueError):
        weak_residual(DensityField(g, one), one, VelocityField.zeros(g), ForcingField.zeros(g), u0_delta=other)


def test_strong_forcing_makes_field_a_weak_solution():
    g = build_grid(CYL01, 16, 16)
    u = field_from(g, u1=lambda r, z: r * np.sin(np.pi * z), u2=lambda r, z: -2 * np.cos(np.pi * z) / np.pi,
                   swirl=lambda r, z: r * (1 - r) * z)
    rho = DensityField(g, 1.0 + 0.1 * g.centers()[0])
    mu = 1.0 + 0.2 * g.centers()[1]
    f = strong_residual_forcing(rho, mu, u)
    assert weak_residual(rho, mu, u, f) < 1e-12
