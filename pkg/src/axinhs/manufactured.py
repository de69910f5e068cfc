"""Manufactured solutions: analytic fields with symbolically derived forcing."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp

from .grid import CoordinateSystem, DomainSpec
from .materials import MaterialLaw, MaterialLaws

r, z = sp.symbols("x1 x2", real=True)
_s = sp.Symbol("s", real=True)


@dataclass
class ManufacturedCase:
    name: str
    domain: DomainSpec
    phi: sp.Expr
    swirl: sp.Expr
    eta: sp.Expr              # function of s
    b: sp.Expr                # function of s (= density)
    rho_bounds: tuple
    mu_bounds: tuple
    velocity: tuple           # sympy (u1, u2, u3)
    rho: sp.Expr
    mu: sp.Expr
    forcing: tuple            # sympy (f1, f2, f3)

    def laws(self) -> MaterialLaws:
        eta_f = sp.lambdify(_s, self.eta, "numpy")
        b_f = sp.lambdify(_s, self.b, "numpy")
        if self.eta.free_symbols:
            eta = MaterialLaw.from_function(eta_f, *self.rho_bounds)
        else:
            eta = MaterialLaw.constant(float(self.eta), *self.rho_bounds)
        if self.b.free_symbols:
            b = MaterialLaw.from_function(b_f, *self.mu_bounds)
        else:
            b = MaterialLaw.constant(float(self.b), *self.mu_bounds)
        return MaterialLaws(eta, b)

    def numeric(self, expr) -> Callable:
        f = sp.lambdify((r, z), expr, "numpy")

        def ev(x1, x2):
            x1 = np.asarray(x1, dtype=float)
            x2 = np.asarray(x2, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.asarray(f(x1, x2), dtype=float) + np.zeros(np.broadcast(x1, x2).shape)
        return ev

    @property
    def phi_fn(self):
        return self.numeric(self.phi)

    @property
    def velocity_fns(self):
        return tuple(self.numeric(e) for e in self.velocity)

    @property
    def forcing_fns(self):
        return tuple(self.numeric(e) for e in self.forcing)

    @property
    def has_swirl(self) -> bool:
        return self.swirl != 0


def _cylindrical_forcing(ur, uz, ut, rho, mu):
    Srr, Szz, Stt = 2 * sp.diff(ur, r), 2 * sp.diff(uz, z), 2 * ur / r
    Srz = sp.diff(ur, z) + sp.diff(uz, r)
    Srt = r * sp.diff(ut / r, r)
    Szt = sp.diff(ut, z)
    div_r = sp.diff(r * mu * Srr, r) / r + sp.diff(mu * Srz, z) - mu * Stt / r
    div_z = sp.diff(r * mu * Srz, r) / r + sp.diff(mu * Szz, z)
    div_t = sp.diff(r**2 * mu * Srt, r) / r**2 + sp.diff(mu * Szt, z)
    adv_r = ur * sp.diff(ur, r) + uz * sp.diff(ur, z) - ut**2 / r
    adv_z = ur * sp.diff(uz, r) + uz * sp.diff(uz, z)
    adv_t = ur * sp.diff(ut, r) + uz * sp.diff(ut, z) + ur * ut / r
    return (rho * adv_r - div_r, rho * adv_z - div_z, rho * adv_t - div_t)


def _cartesian_forcing(u1, u2, u3, rho, mu):
    x = (r, z)
    u = (u1, u2)
    S = [[sp.diff(u[i], x[j]) + sp.diff(u[j], x[i]) for j in range(2)] for i in range(2)]
    f = []
    for i in range(2):
        div = sum(sp.diff(mu * S[i][j], x[j]) for j in range(2))
        adv = u1 * sp.diff(u[i], r) + u2 * sp.diff(u[i], z)
        f.append(rho * adv - div)
    div3 = sp.diff(mu * sp.diff(u3, r), r) + sp.diff(mu * sp.diff(u3, z), z)
    f.append(rho * (u1 * sp.diff(u3, r) + u2 * sp.diff(u3, z)) - div3)
    return tuple(f)


def build_case(name: str, domain: DomainSpec, phi, swirl, eta, b, rho_bounds, mu_bounds) -> ManufacturedCase:
    phi, swirl, eta, b = map(sp.sympify, (phi, swirl, eta, b))
    rho = eta.subs(_s, phi)
    mu = b.subs(_s, rho)
    if domain.coord is CoordinateSystem.CYLINDRICAL_RZ:
        u1 = sp.diff(phi, z) / r
        u2 = -sp.diff(phi, r) / r
        f = _cylindrical_forcing(u1, u2, swirl, rho, mu)
    elif domain.coord is CoordinateSystem.CARTESIAN_XY:
        u1 = sp.diff(phi, z)
        u2 = -sp.diff(phi, r)
        f = _cartesian_forcing(u1, u2, swirl, rho, mu)
    else:
        raise ValueError("manufactured cases need cylindrical or Cartesian coordinates")
    return ManufacturedCase(name, domain, phi, swirl, eta, b, tuple(rho_bounds), tuple(mu_bounds),
                            (u1, u2, swirl), rho, mu, f)


def _catalog(name: str, constant_laws: bool):
    unit = ((0.0, 1.0), (0.0, 1.0))
    smooth_eta = 1 + sp.tanh(_s) / 2
    smooth_b = 1 + _s / 2
    eta, b, rb, mb = smooth_eta, smooth_b, (0.5, 1.5), (1.25, 1.75)
    if constant_laws:
        eta, b, rb, mb = sp.Integer(1), sp.Integer(1), (1.0, 1.0), (1.0, 1.0)
    if name == "cyl-smooth":
        return (DomainSpec("cylindrical", *unit), r**2 * (r - 1) ** 2 * sp.sin(sp.pi * z), 0, eta, b, rb, mb)
    if name == "cyl-swirl":
        return (DomainSpec("cylindrical", *unit), r**2 * (r - 1) ** 2 * sp.sin(sp.pi * z),
                r * (1 - r) * sp.sin(sp.pi * z) * (1 + r), eta, b, rb, mb)
    if name == "cart-taylor":
        return (DomainSpec("cartesian", *unit), sp.sin(sp.pi * r) * sp.sin(sp.pi * z), 0, eta, b, rb, mb)
    if name == "cart-swirl":
        return (DomainSpec("cartesian", *unit), sp.sin(sp.pi * r) * sp.sin(sp.pi * z),
                sp.cos(sp.pi * r) * sp.sin(2 * sp.pi * z) / 2, eta, b, rb, mb)
    if name == "swirl-rigid":
        return (DomainSpec("cylindrical", *unit), 0, r, sp.Integer(1), sp.Integer(1), (1.0, 1.0), (1.0, 1.0))
    raise KeyError(name)


CATALOG = ("cyl-smooth", "cyl-swirl", "cart-taylor", "cart-swirl", "swirl-rigid")


def manufactured_case(name: str, constant_laws: bool = False) -> ManufacturedCase:
    """Catalogued manufactured solution; ``constant_laws`` replaces eta and b by 1."""
    try:
        params = _catalog(name, constant_laws)
    except KeyError:
        raise ValueError(f"unknown manufactured case {name!r}; choose from {', '.join(CATALOG)}") from None
    return build_case(name, *params)


def simplify_forcing(case: ManufacturedCase) -> tuple:
    return tuple(sp.simplify(e) for e in case.forcing)


def forcing_on_grid(case: ManufacturedCase, grid):
    """Forcing sampled at faces (in-plane) and cells (swirl); axis faces are left at zero."""
    from .weakform import ForcingField
    f1, f2, f3 = case.forcing_fns
    v1 = f1(*grid.faces1())
    v2 = f2(*grid.faces2())
    v3 = f3(*grid.centers())
    if grid.domain.has_axis:
        v1[0, :] = 0.0
    return ForcingField(grid, v1, v2, v3)
