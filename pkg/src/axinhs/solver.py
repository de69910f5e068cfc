"""Linearized solve, Picard fixed-point iteration and load continuation.

The unknown is the zero-trace, divergence-free part ``u`` (stream function on
interior nodes plus swirl on cells).  At load parameter ``lam`` the total
velocity is ``U = lam * u0_delta + u`` and one linearized step solves

    a(mu~; U, v) + lam * c(rho~, W; U, v) = lam * <f, v>     for all test v

with the advecting field ``W = lam * u0_delta + u~`` and the material fields
``rho~, mu~`` frozen at the previous iterate ``u~``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla
from scipy import ndimage

from .fields import (ClosureTag, DensityField, StreamFunctionField, VelocityField, density_from_coordinate,
                     node_to_cell)
from .grid import StaggeredGrid2D
from .materials import MaterialLaws
from .weakform import (BoundaryData, ExtendedBoundaryData, FluxError, ForcingField, default_delta, extend_boundary_data,
                       operators_for, weak_residual)

log = logging.getLogger(__name__)


class LinearSolverError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    lambda_schedule: tuple = (0.25, 0.5, 0.75, 1.0)
    picard_tol: float = 1e-8
    picard_max_iter: int = 200
    damping: float = 1.0
    mollifier_width: Optional[float] = None   # cells; None picks by closure
    linear_tol: float = 1e-10
    linear_max_iter: int = 1000
    direct_threshold: int = 200_000
    max_bisections: int = 6
    face_average: str = "arithmetic"

    def __post_init__(self):
        self.lambda_schedule = tuple(float(v) for v in self.lambda_schedule)
        self.validate()

    def validate(self):
        s = np.asarray(self.lambda_schedule)
        if s.size == 0 or s[-1] != 1.0 or np.any(s <= 0.0) or np.any(np.diff(s) <= 0.0):
            raise ValueError(f"lambda schedule must increase within (0, 1] and end at 1.0, got {self.lambda_schedule}")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if self.mollifier_width is not None and self.mollifier_width < 0:
            raise ValueError("mollifier width must be >= 0")
        if self.picard_tol <= 0 or self.linear_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.picard_max_iter < 1 or self.linear_max_iter < 1:
            raise ValueError("iteration limits must be positive")
        if self.face_average not in ("arithmetic", "harmonic"):
            raise ValueError(f"unknown face averaging {self.face_average!r}")


@dataclass
class Problem:
    """Everything defining one boundary-value problem.

    ``closure`` is ``"stream"`` (density follows the stream function),
    ``"coordinate:<x1|x2|theta>"`` (density follows a coordinate the flow
    never moves along) or ``"explicit"`` (``rho`` and ``mu`` given directly,
    bypassing the material laws).
    """

    grid: StaggeredGrid2D
    laws: Optional[MaterialLaws]
    boundary: BoundaryData
    forcing: Optional[ForcingField] = None
    delta: Optional[float] = None
    closure: str = "stream"
    rho: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = None
    name: str = "problem"

    def __post_init__(self):
        if self.forcing is None:
            self.forcing = ForcingField.zeros(self.grid)
        if self.delta is None:
            self.delta = default_delta(self.grid)
        kind = self.closure.split(":")[0]
        if kind not in ("stream", "coordinate", "explicit"):
            raise ValueError(f"unknown closure {self.closure!r}")
        if kind == "explicit":
            if self.rho is None or self.mu is None:
                raise ValueError("explicit closure needs rho and mu")
        elif self.laws is None:
            raise ValueError("material laws required")

    @property
    def closure_kind(self) -> str:
        return self.closure.split(":")[0]


@dataclass
class ContinuationState:
    lam: float
    dofs: np.ndarray
    phi: StreamFunctionField
    rho: DensityField
    mu: np.ndarray
    iterations: int = 0
    history: list = field(default_factory=list)


@dataclass
class LinearSolveResult:
    dofs: np.ndarray
    velocity: VelocityField
    linear_iters: int
    relative_residual: float


@dataclass
class IterationRecord:
    lam: float
    iteration: int
    picard_residual: float
    linear_iters: int


@dataclass(frozen=True)
class SolutionBundle:
    problem: Problem
    config: SolverConfig
    extension: ExtendedBoundaryData
    dofs: np.ndarray
    u_total: VelocityField
    u_tilde: VelocityField
    phi_total: StreamFunctionField
    rho: DensityField
    mu: np.ndarray
    weak_residual: float
    energy_defect: float
    load_norm: float
    log: tuple
    converged: bool
    lam_reached: float
    wall_time: float

    @property
    def picard_iterations(self) -> int:
        return len(self.log)

    @property
    def trusted(self) -> bool:
        return self.converged

    def iteration_log_text(self) -> str:
        lines = ["# lambda iter picard_residual linear_iters"]
        lines += [f"{r.lam!r} {r.iteration} {r.picard_residual:.17e} {r.linear_iters}" for r in self.log]
        return "\n".join(lines) + "\n"


def mollify_viscosity(mu_raw, width: float, bounds=None) -> np.ndarray:
    """Gaussian smoothing with standard deviation ``width`` cells, reflecting at walls."""
    if width < 0:
        raise ValueError("mollifier width must be >= 0")
    mu_raw = np.asarray(mu_raw, dtype=float)
    if width == 0:
        return mu_raw
    if np.all(mu_raw == mu_raw.flat[0]):
        return mu_raw.copy()
    out = ndimage.gaussian_filter(mu_raw, sigma=float(width), mode="reflect")
    lo, hi = bounds if bounds is not None else (mu_raw.min(), mu_raw.max())
    return np.clip(out, lo, hi)


class SolverContext:
    """Grid operators, lifting and loads shared by every linearized solve."""

    def __init__(self, problem: Problem, config: SolverConfig):
        self.problem = problem
        self.config = config
        self.grid = problem.grid
        self.ops = operators_for(problem.grid)
        self.extension = extend_boundary_data(problem.boundary, problem.delta)
        self.Z0 = self.extension.u0_delta.to_vector()
        self.FZ = problem.forcing.z_vector()
        self.unit = self.ops.unit_norm_matrix()
        width = config.mollifier_width
        if width is None:
            width = 0.0
            if problem.closure_kind == "stream" and not problem.laws.eta.is_continuous:
                width = 1.0
        self.mollifier_width = float(width)
        self._fixed = None

    def norm(self, x) -> float:
        return float(np.sqrt(max(x @ (self.unit @ x), 0.0)))

    def materials(self, lam: float, dofs) -> tuple[DensityField, np.ndarray, StreamFunctionField]:
        """Density and viscosity frozen at the iterate ``dofs``."""
        p = self.problem
        g = self.grid
        phi = StreamFunctionField(g, self.ops.stream_nodes(dofs))
        kind = p.closure_kind
        if kind != "stream":
            if self._fixed is None:
                if kind == "explicit":
                    rho = DensityField(g, np.asarray(p.rho, float) + np.zeros(g.shape_cells), ClosureTag.EXPLICIT)
                    mu = np.asarray(p.mu, float) + np.zeros(g.shape_cells)
                else:
                    which = p.closure.split(":", 1)[1] if ":" in p.closure else "theta"
                    rho = density_from_coordinate(p.laws, g, which)
                    mu = mollify_viscosity(p.laws.b(rho.values), self.mollifier_width, p.laws.mu_bounds)
                self._fixed = (rho, mu)
            rho, mu = self._fixed
            return rho, mu, phi
        total = phi.values + lam * self.extension.phi0_delta.values
        rho = DensityField(g, p.laws.eta(node_to_cell(total)), ClosureTag.TYPE_I_ETA_OF_STREAM)
        mu = mollify_viscosity(p.laws.b(rho.values), self.mollifier_width, p.laws.mu_bounds)
        return rho, mu, phi

    def check_bounds(self, rho: DensityField, mu):
        laws = self.problem.laws
        if laws is None or self.problem.closure_kind == "explicit":
            return
        lo, hi = laws.rho_bounds
        assert np.all(rho.values >= lo) and np.all(rho.values <= hi), "density left its bounds"
        lo, hi = laws.mu_bounds
        assert np.all(mu >= lo) and np.all(mu <= hi), "viscosity left its bounds"

    def system(self, lam: float, rho: DensityField, mu, advect_dofs):
        ops = self.ops
        A = ops.viscous_matrix(mu, self.config.face_average, wall_closure=True)
        Z0 = lam * self.Z0
        if lam != 0.0:
            W = Z0 + ops.E @ advect_dofs
            M = A + lam * ops.convection_matrix(rho.values, W)
        else:
            M = A
        K = ops.project(M)
        b = lam * (ops.ET @ self.FZ) - ops.ET @ (M @ Z0)
        return K.tocsc(), b

    def solve(self, K, b) -> tuple[np.ndarray, int, float]:
        cfg = self.config
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(b), 0, 0.0
        if K.shape[0] <= cfg.direct_threshold:
            try:
                x = spla.splu(K).solve(b)
            except RuntimeError as exc:
                raise LinearSolverError(f"sparse factorization failed: {exc}") from exc
            if not np.all(np.isfinite(x)):
                raise LinearSolverError("sparse factorization produced non-finite values")
            return x, 0, float(np.linalg.norm(K @ x - b) / bnorm)
        ilu = spla.spilu(K, drop_tol=1e-5, fill_factor=20)
        M = spla.LinearOperator(K.shape, ilu.solve)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.gmres(K, b, rtol=cfg.linear_tol, atol=0.0, restart=200, maxiter=cfg.linear_max_iter,
                             M=M, callback=cb, callback_type="pr_norm")
        rel = float(np.linalg.norm(K @ x - b) / bnorm)
        if info != 0 or rel > 10 * cfg.linear_tol:
            raise LinearSolverError(f"GMRES stopped with relative residual {rel:.3e}; try a smaller lambda step")
        return x, count[0], rel


def solve_linearized(state: ContinuationState, ctx: SolverContext) -> LinearSolveResult:
    """One application of the linearized map at ``state.lam`` with materials frozen in ``state``."""
    K, b = ctx.system(state.lam, state.rho, state.mu, state.dofs)
    x, its, rel = ctx.solve(K, b)
    return LinearSolveResult(x, ctx.ops.velocity(x), its, rel)


def _picard(ctx: SolverContext, lam: float, x0: np.ndarray, records: list):
    cfg = ctx.config
    x = x0.copy()
    for it in range(1, cfg.picard_max_iter + 1):
        rho, mu, phi = ctx.materials(lam, x)
        ctx.check_bounds(rho, mu)
        state = ContinuationState(lam, x, phi, rho, mu, it)
        res = solve_linearized(state, ctx)
        step = res.dofs - x
        dnorm = ctx.norm(step)
        x_new = x + cfg.damping * step if cfg.damping != 1.0 else res.dofs
        scale = max(1.0, ctx.norm(x))
        records.append(IterationRecord(lam, it, dnorm / scale, res.linear_iters))
        log.debug("lambda=%g iter=%d residual=%.3e", lam, it, dnorm / scale)
        x = x_new
        if dnorm <= cfg.picard_tol * scale:
            return True, x
        if not np.isfinite(dnorm):
            return False, x0
    return False, x


def fixed_point_solve(problem: Problem, config: Optional[SolverConfig] = None) -> SolutionBundle:
    config = config or SolverConfig()
    config.validate()
    t0 = time.perf_counter()
    ctx = SolverContext(problem, config)
    ops = ctx.ops
    x = np.zeros(ops.n_dofs)
    records: list[IterationRecord] = []
    targets = list(config.lambda_schedule)
    lam_prev, bisections, converged = 0.0, 0, True
    i = 0
    while i < len(targets):
        lam = targets[i]
        try:
            ok, x_new = _picard(ctx, lam, x, records)
        except LinearSolverError as exc:
            log.warning("linear solve failed at lambda=%g: %s", lam, exc)
            ok, x_new = False, x
        if ok:
            x, lam_prev = x_new, lam
            i += 1
            continue
        if bisections >= config.max_bisections:
            log.warning("no convergence at lambda=%g after %d bisections", lam, bisections)
            converged = False
            x = x_new
            break
        bisections += 1
        targets.insert(i, 0.5 * (lam_prev + lam))
        log.info("bisecting lambda step: %g -> %g", lam, targets[i])
    return make_bundle(ctx, x, records, converged, lam_prev if not converged else 1.0, time.perf_counter() - t0)


def make_bundle(ctx: SolverContext, x, records, converged: bool, lam_reached: float, wall_time: float = 0.0):
    ops = ctx.ops
    p = ctx.problem
    rho, mu, phi = ctx.materials(1.0, x)
    Z = ctx.Z0 + ops.E @ x
    u_total = ops.layout.unpack(Z)
    wr = weak_residual(rho, mu, u_total, p.forcing, ctx.extension.u0_delta, ctx.config.face_average)
    defect, load = energy_terms(ctx, x, rho, mu)
    phi_total = StreamFunctionField(ctx.grid, phi.values + ctx.extension.phi0_delta.values, (0, 0),
                                    ctx.extension.phi0_delta.gauge)
    return SolutionBundle(p, ctx.config, ctx.extension, x, u_total, ops.velocity(x), phi_total, rho, mu, wr,
                          defect, load, tuple(records), converged, lam_reached, wall_time)


def energy_terms(ctx: SolverContext, x, rho: DensityField, mu) -> tuple[float, float]:
    """Defect of the integral identity tested with the zero-trace part, and the load norm."""
    ops = ctx.ops
    Z = ctx.Z0 + ops.E @ x
    A = ops.viscous_matrix(mu, ctx.config.face_average, wall_closure=True)
    N = ops.convection_matrix(rho.values, Z)
    r = ops.ET @ (A @ Z + N @ Z - ctx.FZ)
    loads = ops.ET @ (ctx.FZ - A @ ctx.Z0)
    return float(abs(r @ x)), float(np.linalg.norm(loads))


def energy_identity_defect(bundle: SolutionBundle) -> float:
    """Recompute the energy defect of a bundle (flag untrusted bundles via ``bundle.trusted``)."""
    ctx = SolverContext(bundle.problem, bundle.config)
    return energy_terms(ctx, bundle.dofs, bundle.rho, bundle.mu)[0]


def fixed_point_step(bundle: SolutionBundle, lam: float = 1.0) -> np.ndarray:
    """Apply the linearized map once to the bundle's solution; returns the new unknowns."""
    ctx = SolverContext(bundle.problem, bundle.config)
    rho, mu, phi = ctx.materials(lam, bundle.dofs)
    return solve_linearized(ContinuationState(lam, bundle.dofs, phi, rho, mu), ctx).dofs


def discrete_h1_norm(grid: StaggeredGrid2D, dofs) -> float:
    return operators_for(grid).h1_norm(dofs)
