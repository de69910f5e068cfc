"""Reference solutions: radial swirl in an annulus and layered shear channels.

Both are obtained by integrating the conserved flux once and the resulting
first-order relation once more with adaptive quadrature, so piecewise-constant
viscosity is handled exactly when its jumps are passed as breakpoints.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

QUAD_TOL = 1e-13

# sixth-order central first-derivative stencil
_D1_OFFSETS = np.arange(-3, 4)
_D1_WEIGHTS = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0


def _as_profile(mu) -> Callable:
    if callable(mu):
        return mu
    val = float(mu)
    return lambda s: val + 0.0 * np.asarray(s, dtype=float)


def _quad(f, a, b, points) -> float:
    if a == b:
        return 0.0
    lo, hi = min(a, b), max(a, b)
    pts = [p for p in points if lo < p < hi]
    edges = [lo] + sorted(pts) + [hi]
    total = 0.0
    for x0, x1 in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(f, x0, x1, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
        total += val
    return total if b >= a else -total


def _cumulative(f, xs, points, start=None) -> np.ndarray:
    """Integrals of ``f`` from ``start`` (default ``xs[0]``) to each ``xs[k]``."""
    out = np.zeros(len(xs))
    if len(xs) and start is not None:
        out[0] = _quad(f, start, xs[0], points)
    for k in range(1, len(xs)):
        out[k] = out[k - 1] + _quad(f, xs[k - 1], xs[k], points)
    return out


def _check_mu(mu, a, b, points):
    probe = np.linspace(a, b, 257)
    probe = np.concatenate([probe, np.asarray([p for p in points if a <= p <= b], dtype=float)])
    vals = np.asarray(mu(probe), dtype=float)
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0.0):
        raise ValueError("viscosity profile must be positive")


def _flux_form_residual(x, integrand, weight, source, H: float, nodes: int = 24) -> np.ndarray:
    """``d/dx(weight * u') - source`` at ``x`` from exact local increments of ``u``.

    ``u`` is known through its derivative ``integrand``; increments over a
    stencil of step ``H`` use Gauss-Legendre quadrature, so only differences of
    ``u`` enter and the result does not depend on a sampling density.
    """
    x = np.asarray(x, dtype=float)
    t, w = np.polynomial.legendre.leggauss(nodes)
    m = np.arange(-6, 6)
    lo = x[:, None] + m[None, :] * H
    pts = lo[..., None] + 0.5 * H * (t + 1.0)
    inc = 0.5 * H * np.sum(w * integrand(pts), axis=-1)
    U = np.concatenate([np.zeros((x.size, 1)), np.cumsum(inc, axis=1)], axis=1)
    U -= U[:, 6:7]
    grid = x[:, None] + np.arange(-6, 7)[None, :] * H
    du = np.zeros((x.size, 7))
    for j in range(7):
        for off, c in zip(_D1_OFFSETS, _D1_WEIGHTS):
            if c:
                du[:, j] += c * U[:, j + 3 + off]
    flux = weight(grid[:, 3:10]) * du / H
    d = sum(c * flux[:, 3 + off] for off, c in zip(_D1_OFFSETS, _D1_WEIGHTS) if c) / H
    return d - source(x)


def _smooth_mask(x: np.ndarray, values: np.ndarray, points, reach: float) -> np.ndarray:
    mask = np.isfinite(values)
    for p in points:
        mask &= np.abs(x - p) > reach
    return mask


# --------------------------------------------------------------------------
# radial swirl

@dataclass
class RadialSwirlSolution:
    r_a: float
    r_b: float
    mu: Callable
    C: float
    g_a: float
    g_b: float
    K: float
    breakpoints: tuple
    r: np.ndarray
    g: np.ndarray
    companion: np.ndarray
    companion_flux: float

    def __call__(self, r):
        """g at arbitrary radii."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.array([self.g_a + _quad(self._integrand, self.r_a, x, self.breakpoints) for x in r.ravel()])
        return out.reshape(r.shape)

    def _integrand(self, s):
        return (-0.5 * self.C * s * s + self.K) / (self.mu(s) * s**3)

    def dg(self, r):
        return self._integrand(np.asarray(r, dtype=float))

    def swirl_velocity(self, r):
        """Azimuthal velocity ``r g(r)``."""
        return np.asarray(r, dtype=float) * self(r)

    def companion_value(self, r):
        """Swirl profile with ``d/dr(mu du/dr) = 0`` and the same end values."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        f = lambda s: 1.0 / self.mu(s)
        out = np.array([self.g_a + self.companion_flux * _quad(f, self.r_a, x, self.breakpoints) for x in r.ravel()])
        return out.reshape(r.shape)

    def ode_residual(self, samples: int = 1001) -> tuple[np.ndarray, np.ndarray]:
        """``d/dr(mu r^3 g') + C r`` by nested finite differences of quadrature samples.

        Points whose stencils cross a breakpoint are dropped.
        """
        r = np.linspace(self.r_a, self.r_b, samples)
        H = 1e-3 * (self.r_b - self.r_a)
        r = r[(r - 6 * H >= self.r_a) & (r + 6 * H <= self.r_b)]
        res = _flux_form_residual(r, self._integrand, lambda s: self.mu(s) * s**3, lambda s: -self.C * s, H)
        keep = _smooth_mask(r, res, self.breakpoints, 6.5 * H)
        return r[keep], res[keep]


def radial_swirl_oracle(mu_profile, C: float, r_a: float, r_b: float, g_a: float, g_b: float,
                        samples=65, breakpoints: Sequence[float] = ()) -> RadialSwirlSolution:
    """Two-point solution of ``d/dr(mu r^3 dg/dr) = -C r`` on ``[r_a, r_b]``."""
    if r_a <= 0:
        raise ValueError("annulus must stay off the axis (r_a > 0)")
    if r_b <= r_a:
        raise ValueError("need r_b > r_a")
    mu = _as_profile(mu_profile)
    points = tuple(float(p) for p in breakpoints)
    _check_mu(mu, r_a, r_b, points)
    i0 = _quad(lambda s: 1.0 / (mu(s) * s**3), r_a, r_b, points)
    i2 = _quad(lambda s: 0.5 / (mu(s) * s), r_a, r_b, points)
    K = (g_b - g_a + C * i2) / i0
    r = np.linspace(r_a, r_b, samples) if np.isscalar(samples) else np.asarray(samples, dtype=float)
    sol = RadialSwirlSolution(r_a, r_b, mu, float(C), float(g_a), float(g_b), float(K), points, r,
                              np.empty(0), np.empty(0), 0.0)
    sol.g = g_a + _cumulative(sol._integrand, r, points, r_a)
    j0 = _quad(lambda s: 1.0 / mu(s), r_a, r_b, points)
    sol.companion_flux = (g_b - g_a) / j0
    sol.companion = g_a + sol.companion_flux * _cumulative(lambda s: 1.0 / mu(s), r, points, r_a)
    return sol


def stream_ode_residual(phi: Callable, mu_profile, C: float, r, h: float = 1e-2) -> np.ndarray:
    """``d2/dr2(mu r^3 d/dr(phi'/r)) + C`` for a candidate radial stream function.

    Four nested sixth-order differences; ``h`` trades truncation against
    cancellation (about ``eps / h^4``).
    """
    mu = _as_profile(mu_profile)
    r = np.atleast_1d(np.asarray(r, dtype=float))

    def d1(f, x):
        return sum(w * f(x + o * h) for o, w in zip(_D1_OFFSETS, _D1_WEIGHTS) if w) / h

    inner = lambda x: d1(phi, x) / x
    flux = lambda x: mu(x) * x**3 * d1(inner, x)
    return d1(lambda x: d1(flux, x), r) + C


# --------------------------------------------------------------------------
# layered channel

@dataclass
class LayeredChannelSolution:
    a: float
    b: float
    mu: Callable
    C: tuple
    ends: tuple           # ((u1_a, u1_b), (u2_a, u2_b))
    K: tuple
    breakpoints: tuple
    x: np.ndarray = field(default_factory=lambda: np.empty(0))
    u1: np.ndarray = field(default_factory=lambda: np.empty(0))
    u2: np.ndarray = field(default_factory=lambda: np.empty(0))

    def _value(self, comp: int, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        C, K, ua = self.C[comp], self.K[comp], self.ends[comp][0]
        f = lambda s: (C * s + K) / self.mu(s)
        out = np.array([ua + _quad(f, self.a, v, self.breakpoints) for v in x.ravel()])
        return out.reshape(x.shape)

    def velocity(self, comp: int, x):
        """Component ``comp`` (0 or 1) of the in-layer velocity."""
        return self._value(comp, x)

    def stress(self, comp: int, x):
        return self.C[comp] * np.asarray(x, dtype=float) + self.K[comp]

    def ode_residual(self, comp: int, samples: int = 1001) -> tuple[np.ndarray, np.ndarray]:
        x = np.linspace(self.a, self.b, samples)
        H = 1e-3 * (self.b - self.a)
        x = x[(x - 6 * H >= self.a) & (x + 6 * H <= self.b)]
        C, K = self.C[comp], self.K[comp]
        res = _flux_form_residual(x, lambda s: (C * s + K) / self.mu(s), self.mu, lambda s: C + 0.0 * s, H)
        keep = _smooth_mask(x, res, self.breakpoints, 6.5 * H)
        return x[keep], res[keep]


def layered_channel_oracle(mu_profile, C1: float, C2: float, x3_a: float, x3_b: float, bc,
                           samples=65, breakpoints: Sequence[float] = ()) -> LayeredChannelSolution:
    """``d/dx3(mu du_i/dx3) = C_i`` with ``bc = ((u1_a, u1_b), (u2_a, u2_b))``."""
    if x3_b <= x3_a:
        raise ValueError("need x3_b > x3_a")
    mu = _as_profile(mu_profile)
    points = tuple(float(p) for p in breakpoints)
    _check_mu(mu, x3_a, x3_b, points)
    j0 = _quad(lambda s: 1.0 / mu(s), x3_a, x3_b, points)
    j1 = _quad(lambda s: s / mu(s), x3_a, x3_b, points)
    ends = tuple((float(p[0]), float(p[1])) for p in bc)
    Ks = tuple((ub - ua - C * j1) / j0 for (ua, ub), C in zip(ends, (C1, C2)))
    sol = LayeredChannelSolution(float(x3_a), float(x3_b), mu, (float(C1), float(C2)), ends, Ks, points)
    x = np.linspace(x3_a, x3_b, samples) if np.isscalar(samples) else np.asarray(samples, dtype=float)
    sol.x = x
    for comp, name in ((0, "u1"), (1, "u2")):
        C, K, ua = sol.C[comp], Ks[comp], ends[comp][0]
        setattr(sol, name, ua + _cumulative(lambda s: (C * s + K) / mu(s), x, points, x3_a))
    return sol
