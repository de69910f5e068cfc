from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import solve_bvp

from axinhs.oracles import layered_channel_oracle, radial_swirl_oracle, stream_ode_residual


def test_unit_viscosity_annulus_closed_form():
    sol = radial_swirl_oracle(1.0, 0.0, 1.0, 2.0, 0.0, 1.0)
    r = np.linspace(1.0, 2.0, 11)
    assert np.allclose(sol(r), 4.0 / 3.0 * (1.0 - r**-2), atol=1e-12)
    assert abs(sol(1.5)[0] - 20.0 / 27.0) < 1e-12


def test_annulus_against_independent_bvp():
    mu = lambda r: 1.0 + 0.5 * np.sin(r)
    sol = radial_swirl_oracle(mu, 0.7, 1.0, 2.0, 0.2, 1.1)

    # first-order system y = (g, mu r^3 g')
    def rhs(r, y):
        return np.vstack([y[1] / (mu(r) * r**3), -0.7 * r])

    def bc(ya, yb):
        return np.array([ya[0] - 0.2, yb[0] - 1.1])

    r = np.linspace(1.0, 2.0, 41)
    bvp = solve_bvp(rhs, bc, r, np.zeros((2, r.size)), tol=1e-10, max_nodes=100000)
    assert bvp.success
    assert np.abs(bvp.sol(r)[0] - sol(r)).max() < 1e-8


def test_annulus_ode_residual_small():
    sol = radial_swirl_oracle(lambda r: 2.0 + r, 1.3, 1.0, 3.0, 0.0, 1.0)
    _, res = sol.ode_residual()
    assert np.abs(res).max() < 1e-6


def test_annulus_piecewise_viscosity_keeps_flux_continuous():
    mu = lambda r: np.where(r < 1.5, 1.0, 3.0)
    sol = radial_swirl_oracle(mu, 0.0, 1.0, 2.0, 0.0, 1.0, breakpoints=(1.5,))
    # C = 0: mu r^3 g' is the constant K on both sides of the jump
    for r in (1.2, 1.49, 1.51, 1.9):
        assert sol.mu(r) * r**3 * sol.dg(r) == pytest.approx(sol.K, rel=1e-12)
    assert sol(2.0)[0] == pytest.approx(1.0, abs=1e-12)


def test_annulus_rejects_axis():
    with pytest.raises(ValueError):
        radial_swirl_oracle(1.0, 0.0, 0.0, 1.0, 0.0, 1.0)


def test_companion_profile_is_linear_for_constant_viscosity():
    sol = radial_swirl_oracle(2.0, 0.0, 1.0, 2.0, 0.5, 1.5)
    r = np.array([1.25, 1.5, 1.75])
    assert np.allclose(sol.companion_value(r), 0.5 + (r - 1.0), atol=1e-12)


def test_two_layer_couette_values():
    mu = lambda s: np.where(np.asarray(s) < 0.5, 1.0, 2.0)
    sol = layered_channel_oracle(mu, 0.0, 0.0, 0.0, 1.0, ((0.0, 1.0), (0.0, 0.0)), breakpoints=(0.5,))
    assert sol.stress(0, 0.3) == pytest.approx(4.0 / 3.0, rel=1e-12)
    assert sol.velocity(0, 0.5)[0] == pytest.approx(2.0 / 3.0, rel=1e-12)
    assert sol.velocity(0, 1.0)[0] == pytest.approx(1.0, abs=1e-12)


def test_poiseuille_constant_viscosity_parabola():
    sol = layered_channel_oracle(1.0, -2.0, 0.0, 0.0, 1.0, ((0.0, 0.0), (0.0, 0.0)))
    x = np.linspace(0.0, 1.0, 9)
    assert np.allclose(sol.velocity(0, x), x * (1.0 - x), atol=1e-12)
    assert np.allclose(sol.velocity(1, x), 0.0)


def test_channel_ode_residual_small():
    sol = layered_channel_oracle(lambda s: 1.0 + s, -2.0, 1.0, 0.0, 1.0, ((0.0, 0.0), (0.0, 1.0)))
    for comp in (0, 1):
        _, res = sol.ode_residual(comp)
        assert np.abs(res).max() < 1e-6


def test_stream_ode_residual_of_exact_profile():
    # mu = 1, C = 0: phi' / r = g = 4/3 (1 - r^-2)
    phi = lambda r: 2.0 / 3.0 * r**2 - 4.0 / 3.0 * np.log(r)
    res = stream_ode_residual(phi, 1.0, 0.0, np.linspace(1.2, 1.8, 7))
    assert np.abs(res).max() < 1e-5


def test_nonpositive_viscosity_rejected():
    with pytest.raises(ValueError):
        layered_channel_oracle(lambda s: s - 0.5, 0.0, 0.0, 0.0, 1.0, ((0.0, 1.0), (0.0, 0.0)))
