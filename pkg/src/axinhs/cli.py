"""Command line: ``axinhs <solve|verify|oracle|study> <config.ini> [--set section.key=value ...]``.

Exit codes: 0 success, 1 a verification check failed, 2 configuration error,
3 solver non-convergence (partial artifacts are still written), 4 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_IO = 0, 1, 2, 3, 4
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

log = logging.getLogger("axinhs")


def _threads_from_env() -> int:
    raw = os.environ.get("AXINHS_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"AXINHS_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"AXINHS_THREADS must be a positive integer, got {raw!r}")
    return n


@dataclass
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    note: str = ""
    skipped: bool = False

    @property
    def status(self) -> str:
        return "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")


def _table(header, rows) -> str:
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    out = []
    for k, r in enumerate(cells):
        out.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        if k == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out)


def _fmt(v) -> str:
    return f"{v:.3e}" if isinstance(v, float) else str(v)


# --------------------------------------------------------------------------
# verification suite

def verification_checks(setup, bundle, seed: int = 0) -> list[Check]:
    import numpy as np

    from .fields import boundary_flux, divergence_residual, mass_conservation_residual, streamline_mass_residual
    from .weakform import operators_for

    p = setup.problem
    g = p.grid
    u = bundle.u_total
    ops = operators_for(g)
    h = min(g.h1, g.h2)
    checks = []

    umax = max(np.abs(u.u1).max(), np.abs(u.u2).max(), 1e-300)
    div = float(np.abs(divergence_residual(u)).max() / (umax / h))
    checks.append(Check("divergence", div, 1e-13, div <= 1e-13, "max |div u| h / max|u|"))

    kind = p.closure_kind
    scale = max(float(np.abs(bundle.rho.values).max()) * umax / h, 1e-300)
    if kind == "explicit":
        checks.append(Check("mass", 0.0, 0.0, True, "explicit rho is not transported", skipped=True))
    else:
        if kind == "stream":
            m = streamline_mass_residual(p.laws.eta, bundle.phi_total, u)
            note = "rho = eta(phi), streamline-averaged face density"
            lim = 1e-13
        else:
            # u . grad rho: exact zero needs the cross-flow itself, known to the Picard tolerance
            m = mass_conservation_residual(bundle.rho, u, bundle.config.face_average)
            note = "u.grad rho, rho along an inert coordinate"
            lim = bundle.config.picard_tol
        val = m.max_norm / scale
        checks.append(Check("mass", val, lim, val <= lim, note))

    u0 = p.boundary.as_velocity()
    flux_scale = max(sum(abs(boundary_flux(u0, c)) for c in g.domain.boundary_components), 1e-300)
    net = abs(boundary_flux(u0, "ALL")) / flux_scale
    checks.append(Check("boundary_flux", net, 1e-12, net <= 1e-12, "net flux of u0 / total |flux|"))

    bd = p.boundary
    same = (np.array_equal(u.u1[0, :], bd.normal["left"]) and np.array_equal(u.u1[-1, :], bd.normal["right"])
            and np.array_equal(u.u2[:, 0], bd.normal["bottom"]) and np.array_equal(u.u2[:, -1], bd.normal["top"]))
    for w in ("left", "right", "bottom", "top"):
        same = same and np.array_equal(u.traces.tangential[w], bd.traces.tangential[w])
        same = same and np.array_equal(u.traces.swirl[w], bd.traces.swirl[w])
    checks.append(Check("trace_reproduction", 0.0 if same else 1.0, 0.0, bool(same), "boundary samples bitwise"))

    rng = np.random.default_rng(seed)
    mu = np.asarray(bundle.mu, float)
    A = ops.project(ops.viscous_matrix(mu, bundle.config.face_average))
    A = ((A + A.T) * 0.5).tocsr()
    A1 = ops.unit_norm_matrix()
    lo, hi = float(mu.min()), float(mu.max())
    worst = 0.0
    for _ in range(20):
        v = rng.standard_normal(ops.n_dofs)
        a, a1 = v @ (A @ v), v @ (A1 @ v)
        worst = max(worst, (lo * a1 - a) / a1, (a - hi * a1) / a1)
    checks.append(Check("spectral_sandwich", max(worst, 0.0), 1e-12, worst <= 1e-12,
                        f"mu in [{lo:.4g}, {hi:.4g}], 20 random vectors"))

    N = ops.project(ops.convection_matrix(bundle.rho.values, u.to_vector()))
    nscale = max(abs(N).max(), 1e-300)
    worst = 0.0
    for _ in range(20):
        v = rng.standard_normal(ops.n_dofs)
        worst = max(worst, abs(v @ (N @ v)) / ((v @ v) * nscale))
    checks.append(Check("convection_skew", worst, 1e-12, worst <= 1e-12, "|v.Nv| / (|v|^2 max|N|)"))

    lim = 10 * bundle.config.linear_tol * bundle.load_norm
    checks.append(Check("energy_identity", bundle.energy_defect, lim, bundle.energy_defect <= lim,
                        "defect <= 10 linear_tol |loads|"))

    lim = 1e3 * bundle.config.picard_tol * max(1.0, bundle.load_norm)
    checks.append(Check("weak_residual", bundle.weak_residual, lim, bundle.weak_residual <= lim,
                        "max scaled defect over the test basis"))

    checks.append(Check("converged", float(bundle.lam_reached), 1.0, bool(bundle.converged),
                        f"{bundle.picard_iterations} Picard iterations"))
    return checks


# --------------------------------------------------------------------------
# modes

def _write_operators(directory, name, bundle):
    from .io import write_coo
    from .weakform import operators_for

    ops = operators_for(bundle.u_total.grid)
    A = ops.project(ops.viscous_matrix(bundle.mu, bundle.config.face_average))
    N = ops.project(ops.convection_matrix(bundle.rho.values, bundle.u_total.to_vector()))
    return [write_coo(directory / f"{name}_A.coo", (A + A.T) * 0.5), write_coo(directory / f"{name}_N.coo", N)]


def _export_solution(cfg, name, bundle, directory):
    from .io import export_fields, write_iteration_log

    q = cfg["output.quantities"].strip()
    quantities = None if q in ("", "all") else [s.strip() for s in q.split(",") if s.strip()]
    paths = []
    for fmt in [f.strip().lower() for f in cfg["output.formats"].split(",") if f.strip()]:
        paths += export_fields(bundle, fmt, directory, name, quantities)
    paths.append(write_iteration_log(directory / f"{name}_iterations.log", bundle))
    if cfg["output.operators"]:
        paths += _write_operators(directory, name, bundle)
    return paths


def _bundle_summary(bundle) -> dict:
    return {
        "converged": bundle.converged,
        "lambda_reached": float(bundle.lam_reached),
        "picard_iterations": bundle.picard_iterations,
        "weak_residual": float(bundle.weak_residual),
        "energy_defect": float(bundle.energy_defect),
        "load_norm": float(bundle.load_norm),
    }


def run_solve(cfg, out, verify: bool = False) -> int:
    from .config import build_problem, solver_config
    from .io import write_summary
    from .solver import fixed_point_solve

    setup = build_problem(cfg)
    directory = _output_dir(cfg)
    bundle = fixed_point_solve(setup.problem, solver_config(cfg))
    name = cfg.name
    paths = _export_solution(cfg, name, bundle, directory)
    summary = {"mode": "verify" if verify else "solve", "case": name, "n1": setup.problem.grid.n1,
               "n2": setup.problem.grid.n2}
    summary.update(_bundle_summary(bundle))
    status = EXIT_OK
    lines = [f"{name}: {setup.problem.grid.coord.value} {setup.problem.grid.n1}x{setup.problem.grid.n2}, "
             f"closure {setup.problem.closure}",
             f"converged {bundle.converged} at lambda {bundle.lam_reached:g} after {bundle.picard_iterations} "
             f"Picard iterations",
             f"weak residual {bundle.weak_residual:.3e}, energy defect {bundle.energy_defect:.3e}, "
             f"|loads| {bundle.load_norm:.3e}"]
    if verify:
        checks = verification_checks(setup, bundle)
        rows = [(c.name, c.status, _fmt(c.value), _fmt(c.limit), c.note) for c in checks]
        lines += ["", _table(("check", "result", "value", "limit", "note"), rows)]
        for c in checks:
            summary[f"check.{c.name}"] = c.status
            summary[f"check.{c.name}.value"] = float(c.value)
        if not all(c.passed for c in checks):
            status = EXIT_CHECK
    if not bundle.converged:
        lines.append("solver did not converge; artifacts hold the last accepted iterate")
        status = EXIT_NONCONVERGED
    summary["exit_status"] = status
    summary.update(cfg.summary_items())
    paths.append(write_summary(directory / "summary.kv", summary))
    _finish(out, lines, cfg, directory, name, paths)
    return status


def _reference_error(setup, bundle) -> tuple[str, float]:
    from . import cases

    if setup.kind == "manufactured":
        return "h1_error", cases.manufactured_error(bundle, setup.reference)[0]
    if setup.kind == "channel":
        return "l2_rel_error", cases.channel_error(bundle, setup.reference)
    if setup.kind == "annulus":
        return "l2_rel_error", cases.annulus_error(bundle, setup.reference)
    raise ValueError("no reference solution")


def _ladder_point(args):
    cfg, n = args
    from .config import build_problem, solver_config
    from .solver import fixed_point_solve

    setup = build_problem(cfg, n)
    bundle = fixed_point_solve(setup.problem, solver_config(cfg))
    label, err = _reference_error(setup, bundle)
    return n, label, err, bool(bundle.converged), bundle.picard_iterations, setup, bundle


def _run_ladder(cfg, threads: int):
    n = cfg.n[0]
    jobs = [(cfg, k) for k in (n, 2 * n, 4 * n)]
    if threads > 1:
        # independent resolutions; the heavy lifting releases the GIL in the sparse solvers
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            return [r[:5] for r in pool.map(_ladder_point, jobs)]
    return [_ladder_point(j)[:5] for j in jobs]


def run_ladder(cfg, out, mode: str, threads: int) -> int:
    from .cases import observed_orders
    from .io import write_oracle_csv, write_summary

    from .config import ConfigError

    kinds = ("channel", "annulus") if mode == "oracle" else ("manufactured", "channel", "annulus")
    case = cfg.case
    from .config import build_problem
    probe = build_problem(cfg) if case else None
    if probe is None or probe.kind not in kinds:
        need = "a layered channel or the annulus swirl case" if mode == "oracle" else \
            "a manufactured, layered channel or annulus swirl case"
        raise ConfigError(f"domain.case: {mode} mode needs {need}, got {case or 'none'!r}")
    directory = _output_dir(cfg)
    results = _run_ladder(cfg, threads)
    ns = [r[0] for r in results]
    errs = [r[2] for r in results]
    label = results[0][1]
    orders = [float("nan")] + observed_orders(errs, ns)
    rows = [(n, f"{e:.6e}", "-" if k == 0 else f"{o:.3f}", "yes" if c else "no", it)
            for k, (n, _, e, c, it), o in zip(range(3), results, orders)]
    name = cfg.name
    lines = [f"{name}: {mode} over n = {', '.join(map(str, ns))}", "",
             _table(("n", label, "order", "converged", "picard"), rows)]
    summary = {"mode": mode, "case": name}
    for (n, _, e, c, it), o in zip(results, orders):
        summary[f"error.n{n}"] = float(e)
        if o == o:
            summary[f"order.n{n}"] = float(o)
        summary[f"converged.n{n}"] = c
    summary["error_kind"] = label
    summary["min_order"] = float(min(orders[1:]))
    summary["monotone"] = bool(all(a > b for a, b in zip(errs, errs[1:])))
    paths = []
    if mode == "oracle":
        orc = probe.reference.oracle
        coord = probe.problem.grid.coord.value
        path = directory / f"{name}_oracle.csv"
        if probe.kind == "channel":
            comp = 1 if probe.reference.variant.endswith("swirl") else 0
            quantity = "swirl_oracle" if comp else "u1_oracle"
            paths.append(write_oracle_csv(path, coord, quantity, "x2", orc.x, orc.u2 if comp else orc.u1))
        else:
            paths.append(write_oracle_csv(path, coord, "g_oracle", "x1", orc.r, orc.g))
            mid = 0.5 * (orc.r_a + orc.r_b)
            g_mid = float(orc(mid)[0])
            lines.append(f"oracle g({mid:g}) = {g_mid:.12f}")
            summary["oracle.g_mid"] = g_mid
    status = EXIT_OK if all(r[3] for r in results) else EXIT_NONCONVERGED
    summary["exit_status"] = status
    summary.update(cfg.summary_items())
    paths.append(write_summary(directory / "summary.kv", summary))
    _finish(out, lines, cfg, directory, name, paths)
    return status


def _output_dir(cfg):
    from pathlib import Path

    from .io import ensure_writable

    d = Path(cfg["output.directory"])
    if not d.is_absolute() and cfg.path is not None and cfg.source("output.directory") == "file":
        d = cfg.base_dir / d
    return ensure_writable(d)


def _finish(out, lines, cfg, directory, name, paths):
    from .io import _write_text

    report = lines + ["", "configuration:"] + ["  " + s for s in cfg.report_lines()]
    text = "\n".join(report) + "\n"
    paths.append(_write_text(directory / f"{name}_report.txt", text))
    out.write("\n".join(lines) + "\n")
    out.write(f"wrote {len(paths)} files to {directory}\n")


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="axinhs", description=__doc__.splitlines()[0])
    ap.add_argument("mode", choices=("solve", "verify", "oracle", "study"))
    ap.add_argument("config", help="INI file with [domain] [materials] [bc] [forcing] [solver] [output]")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override one configuration key (repeatable)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    err = sys.stderr
    try:
        threads = _threads_from_env()
    except ValueError as exc:
        err.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    for var in THREAD_VARS:
        os.environ[var] = str(threads)

    from .config import ConfigError, ConfigIOError, load_config
    from .io import ExportError
    from .weakform import FluxError

    try:
        cfg = load_config(args.config, args.overrides)
        if args.mode in ("solve", "verify"):
            return run_solve(cfg, sys.stdout, verify=args.mode == "verify")
        return run_ladder(cfg, sys.stdout, args.mode, threads)
    except ConfigIOError as exc:
        err.write(f"i/o error: {exc}\n")
        return EXIT_IO
    except (ConfigError, FluxError) as exc:
        err.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except ExportError as exc:
        err.write(f"i/o error: {exc}\n")
        return EXIT_IO
    except OSError as exc:
        err.write(f"i/o error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
