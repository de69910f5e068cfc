"""INI problem configuration: schema, defaults with provenance, and problem assembly."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import sympy as sp

from .grid import DomainSpec, build_grid
from .materials import Interpolation, MaterialLaw, MaterialLaws, read_table
from .solver import Problem, SolverConfig
from .weakform import BoundaryData, ForcingField


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


class ConfigIOError(OSError):
    """A file named by (or holding) the configuration could not be read."""


@dataclass(frozen=True)
class Key:
    default: str
    kind: str            # str | int | float | bool | pair | floats | choice
    choices: tuple = ()
    doc: str = ""


SOLVER_DEFAULTS = SolverConfig()

SCHEMA: dict[str, dict[str, Key]] = {
    "domain": {
        "case": Key("", "str", doc="built-in case; overrides materials, bc and forcing"),
        "coord": Key("cylindrical", "choice", ("cylindrical", "cartesian", "spherical")),
        "extent1": Key("0, 1", "pair"),
        "extent2": Key("0, 1", "pair"),
        "n": Key("32", "int", doc="cells per direction unless n1/n2 are given"),
        "n1": Key("", "int"),
        "n2": Key("", "int"),
    },
    "materials": {
        "closure": Key("stream", "str", doc="stream | coordinate:<x1|x2|theta> | explicit"),
        "eta": Key("1", "str", doc="number, inline 's:v, s:v', or path to a two-column table"),
        "eta_interpolation": Key("linear", "choice", ("linear", "constant")),
        "b": Key("1", "str"),
        "b_interpolation": Key("linear", "choice", ("linear", "constant")),
        "rho_bounds": Key("", "pair", doc="defaults to the table range"),
        "mu_bounds": Key("", "pair", doc="defaults to the table range"),
        "rho": Key("1", "str", doc="explicit closure: density expression in x1, x2"),
        "mu": Key("1", "str", doc="explicit closure: viscosity expression in x1, x2"),
    },
    "bc": {
        "u1": Key("0", "str"),
        "u2": Key("0", "str"),
        "swirl": Key("0", "str"),
        "walls": Key("left, right, bottom, top", "str"),
        "gauge": Key("0", "float"),
    },
    "forcing": {
        "kind": Key("zero", "choice", ("zero", "expression", "manufactured", "file")),
        "f1": Key("0", "str"),
        "f2": Key("0", "str"),
        "f3": Key("0", "str"),
        "case": Key("", "str"),
        "file": Key("", "str", doc="field CSV holding quantities f1, f2, f3"),
    },
    "solver": {
        "lambda_schedule": Key(", ".join(repr(v) for v in SOLVER_DEFAULTS.lambda_schedule), "floats"),
        "picard_tol": Key(repr(SOLVER_DEFAULTS.picard_tol), "float"),
        "picard_max_iter": Key(str(SOLVER_DEFAULTS.picard_max_iter), "int"),
        "damping": Key(repr(SOLVER_DEFAULTS.damping), "float"),
        "mollifier_width": Key("", "float", doc="cells; empty picks by closure"),
        "linear_tol": Key(repr(SOLVER_DEFAULTS.linear_tol), "float"),
        "linear_max_iter": Key(str(SOLVER_DEFAULTS.linear_max_iter), "int"),
        "direct_threshold": Key(str(SOLVER_DEFAULTS.direct_threshold), "int"),
        "max_bisections": Key(str(SOLVER_DEFAULTS.max_bisections), "int"),
        "face_average": Key(SOLVER_DEFAULTS.face_average, "choice", ("arithmetic", "harmonic")),
        "delta_cells": Key("4", "float", doc="boundary-layer width of the lifting in cells"),
    },
    "output": {
        "directory": Key("axinhs-out", "str"),
        "formats": Key("csv", "str", doc="comma list of csv, vtk"),
        "quantities": Key("all", "str"),
        "name": Key("", "str", doc="file prefix; defaults to the case name"),
        "operators": Key("false", "bool", doc="also write A and N in COO format"),
    },
}

_BOOL = {"true": True, "yes": True, "on": True, "1": True, "false": False, "no": False, "off": False, "0": False}


def _convert(section: str, key: str, entry: Key, raw: str):
    name = f"{section}.{key}"
    raw = raw.strip()
    if raw == "" and entry.kind not in ("str",):
        return None
    try:
        if entry.kind == "str":
            return raw
        if entry.kind == "int":
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if entry.kind == "float":
            return float(raw)
        if entry.kind == "bool":
            return _BOOL[raw.lower()]
        if entry.kind == "choice":
            if raw.lower() not in entry.choices:
                raise ConfigError(f"{name}: {raw!r} is not one of {', '.join(entry.choices)}")
            return raw.lower()
        vals = tuple(float(t) for t in raw.replace(";", ",").split(",") if t.strip())
        if entry.kind == "pair" and len(vals) != 2:
            raise ConfigError(f"{name}: expected two numbers, got {raw!r}")
        if not vals:
            raise ValueError
        return vals
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{name}: cannot read {raw!r} as {entry.kind}") from None


@dataclass
class ProblemConfig:
    path: Optional[Path]
    values: dict = field(default_factory=dict)       # (section, key) -> converted value
    raw: dict = field(default_factory=dict)          # (section, key) -> text
    provenance: dict = field(default_factory=dict)   # (section, key) -> file | --set | default

    def __getitem__(self, name: str):
        section, key = name.split(".", 1)
        return self.values[(section, key)]

    def source(self, name: str) -> str:
        section, key = name.split(".", 1)
        return self.provenance[(section, key)]

    @property
    def base_dir(self) -> Path:
        return self.path.parent if self.path is not None else Path(".")

    @property
    def n(self) -> tuple[int, int]:
        n = self["domain.n"]
        n1 = self["domain.n1"] if self["domain.n1"] is not None else n
        n2 = self["domain.n2"] if self["domain.n2"] is not None else n
        return n1, n2

    @property
    def case(self) -> str:
        return self["domain.case"]

    @property
    def name(self) -> str:
        return self["output.name"] or self.case or (self.path.stem if self.path is not None else "problem")

    def report_lines(self) -> list[str]:
        lines = []
        for (section, key), val in self.raw.items():
            lines.append(f"{section}.{key} = {val}  [{self.provenance[(section, key)]}]")
        return lines

    def summary_items(self) -> dict:
        return {f"config.{s}.{k}": (v if v != "" else "-") for (s, k), v in self.raw.items()}


def _parse_overrides(overrides) -> dict:
    out = {}
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected section.key=value")
        name, val = item.split("=", 1)
        if "." not in name:
            raise ConfigError(f"--set {item!r}: key must be section.key")
        section, key = name.strip().split(".", 1)
        out[(section.strip().lower(), key.strip().lower())] = val.strip()
    return out


def load_config(path, overrides=()) -> ProblemConfig:
    """Read an INI file, apply ``section.key=value`` overrides, fill defaults and validate."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str.lower
    cfg_path = None
    if path is not None:
        cfg_path = Path(path)
        try:
            text = cfg_path.read_text()
        except OSError as exc:
            raise ConfigIOError(f"cannot read config {cfg_path}: {exc.strerror or exc}") from exc
        try:
            parser.read_string(text, source=str(cfg_path))
        except configparser.ParsingError as exc:
            lineno, line = exc.errors[0]
            raise ConfigError(f"{cfg_path}:{lineno}: cannot parse {line.strip()!r}") from None
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError(f"{cfg_path}:{exc.lineno}: expected a [section] header before {exc.line.strip()!r}") from None
        except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
            raise ConfigError(f"{cfg_path}:{exc.lineno}: {exc.message if hasattr(exc, 'message') else exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"{cfg_path}: {exc}") from None
    given = {}
    for section in parser.sections():
        sec = section.lower()
        if sec not in SCHEMA:
            raise ConfigError(f"[{section}]: unknown section; expected one of {', '.join(SCHEMA)}")
        for key, val in parser.items(section):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}: unknown key")
            given[(sec, key)] = (val, "file")
    for (sec, key), val in _parse_overrides(overrides).items():
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError(f"{sec}.{key}: unknown key (from --set)")
        given[(sec, key)] = (val, "--set")
    cfg = ProblemConfig(cfg_path)
    for sec, keys in SCHEMA.items():
        for key, entry in keys.items():
            raw, src = given.get((sec, key), (entry.default, "default"))
            cfg.raw[(sec, key)] = raw.strip()
            cfg.provenance[(sec, key)] = src
            cfg.values[(sec, key)] = _convert(sec, key, entry, raw)
    validate(cfg)
    return cfg


def validate(cfg: ProblemConfig) -> None:
    from .cases import NAMED_CASES
    from .manufactured import CATALOG

    case = cfg.case
    if case and case not in NAMED_CASES and case not in CATALOG:
        raise ConfigError(f"domain.case: unknown case {case!r}; choose from {', '.join(NAMED_CASES + CATALOG)}")
    for key in ("n", "n1", "n2"):
        v = cfg[f"domain.{key}"]
        if v is not None and v < 4:
            raise ConfigError(f"domain.{key}: need at least 4 cells per direction, got {v}")
    if cfg["domain.n"] is None:
        raise ConfigError("domain.n: required")
    for key in ("extent1", "extent2"):
        lo, hi = cfg[f"domain.{key}"]
        if not hi > lo:
            raise ConfigError(f"domain.{key}: upper end must exceed lower end, got {lo}, {hi}")
    if cfg["domain.coord"] == "cylindrical" and cfg["domain.extent1"][0] < 0:
        raise ConfigError("domain.extent1: radius must be non-negative")
    if cfg["domain.coord"] == "spherical" and not case:
        raise ConfigError("domain.coord: spherical grids are supported by the field kernels only, not by the solver")
    for key in ("rho_bounds", "mu_bounds"):
        b = cfg[f"materials.{key}"]
        if b is not None and b[0] > b[1]:
            raise ConfigError(f"materials.{key}: lower bound {b[0]} exceeds upper bound {b[1]}")
        if b is not None and key == "mu_bounds" and b[0] <= 0:
            raise ConfigError("materials.mu_bounds: viscosity must stay positive")
    kind = cfg["materials.closure"].split(":")[0]
    if kind not in ("stream", "coordinate", "explicit"):
        raise ConfigError(f"materials.closure: unknown closure {cfg['materials.closure']!r}")
    formats = [f.strip().lower() for f in cfg["output.formats"].split(",") if f.strip()]
    bad = [f for f in formats if f not in ("csv", "vtk")]
    if bad:
        raise ConfigError(f"output.formats: unknown format(s) {', '.join(bad)}; use csv, vtk")
    if cfg["forcing.kind"] == "manufactured" and cfg["forcing.case"] not in CATALOG:
        raise ConfigError(f"forcing.case: expected one of {', '.join(CATALOG)}")
    if cfg["forcing.kind"] == "file" and not cfg["forcing.file"]:
        raise ConfigError("forcing.file: required when forcing.kind = file")
    if cfg["solver.delta_cells"] is None or cfg["solver.delta_cells"] <= 0:
        raise ConfigError("solver.delta_cells: must be positive")
    try:
        solver_config(cfg)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None


def solver_config(cfg: ProblemConfig) -> SolverConfig:
    kw = {}
    for key in ("lambda_schedule", "picard_tol", "picard_max_iter", "damping", "mollifier_width", "linear_tol",
                "linear_max_iter", "direct_threshold", "max_bisections", "face_average"):
        val = cfg[f"solver.{key}"]
        if val is None and key != "mollifier_width":
            raise ConfigError(f"solver.{key}: required")
        kw[key] = val
    return SolverConfig(**kw)


# --------------------------------------------------------------------------
# expressions and tables

_X1, _X2 = sp.symbols("x1 x2", real=True)
_S = sp.Symbol("s", real=True)
_LOCALS = {"x1": _X1, "x2": _X2, "r": _X1, "z": _X2, "x": _X1, "y": _X2, "s": _S, "pi": sp.pi}


def expression(name: str, text: str, symbols=(_X1, _X2)) -> Callable:
    """Numeric callable of a formula in ``x1, x2`` (aliases ``r, z`` and ``x, y``)."""
    try:
        expr = sp.sympify(text, locals=_LOCALS)
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigError(f"{name}: cannot parse expression {text!r}") from None
    extra = expr.free_symbols - set(symbols)
    if extra:
        raise ConfigError(f"{name}: unknown symbols {', '.join(sorted(map(str, extra)))}")
    f = sp.lambdify(symbols, expr, "numpy")

    def ev(*args):
        args = [np.asarray(a, dtype=float) for a in args]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.asarray(f(*args), dtype=float) + np.zeros(np.broadcast(*args).shape)
    return ev


def _resolve(cfg: ProblemConfig, text: str) -> Path:
    p = Path(text)
    return p if p.is_absolute() else cfg.base_dir / p


def material_law(cfg: ProblemConfig, which: str) -> MaterialLaw:
    """``eta`` or ``b`` from a number, an inline table or a table file."""
    key = f"materials.{which}"
    text = cfg[key]
    interp = Interpolation.parse(cfg[f"materials.{which}_interpolation"])
    bounds = cfg["materials.rho_bounds" if which == "eta" else "materials.mu_bounds"]
    try:
        value = float(text)
    except ValueError:
        value = None
    if value is not None:
        pairs = np.array([[0.0, value]])
    elif ":" in text:
        try:
            pairs = np.array([[float(a) for a in item.split(":")] for item in text.split(",") if item.strip()])
        except ValueError:
            raise ConfigError(f"{key}: inline table must read 's:value, s:value, ...'") from None
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise ConfigError(f"{key}: inline table must read 's:value, s:value, ...'")
    else:
        path = _resolve(cfg, text)
        if not path.exists():
            raise ConfigIOError(f"{key}: table file not found: {path}")
        try:
            pairs = read_table(path)
        except OSError as exc:
            raise ConfigIOError(f"{key}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
        if pairs.size == 0:
            raise ConfigError(f"{key}: table {path} is empty")
    if bounds is None:
        lo, hi = float(pairs[:, 1].min()), float(pairs[:, 1].max())
    else:
        lo, hi = bounds
    if np.any(np.diff(pairs[:, 0]) <= 0):
        raise ConfigError(f"{key}: breakpoints must increase")
    if np.any(pairs[:, 1] < lo) or np.any(pairs[:, 1] > hi):
        name = "materials.rho_bounds" if which == "eta" else "materials.mu_bounds"
        raise ConfigError(f"{name}: table values of {key} leave [{lo}, {hi}]")
    try:
        return MaterialLaw.from_table(pairs, lo, hi, interp)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


# --------------------------------------------------------------------------
# problem assembly

@dataclass
class ProblemSetup:
    problem: Problem
    name: str
    kind: str                 # configured | manufactured | channel | annulus | cavity | zero
    reference: object = None  # case object carrying the exact solution, if any


def _named_case(case: str, n1: int, n2: int, delta_cells: float, face_average: str = "arithmetic") -> ProblemSetup:
    from . import cases
    from .manufactured import CATALOG, manufactured_case
    from .weakform import default_delta

    if case in CATALOG:
        if n2 != n1:
            raise ConfigError("domain.n2: manufactured cases use square grids (n1 = n2)")
        mc = manufactured_case(case)
        grid = build_grid(mc.domain, n1, n2)
        p = cases.manufactured_problem(mc, n1, delta=default_delta(grid, delta_cells))
        return ProblemSetup(p, case, "manufactured", mc)
    if case.startswith("channel-"):
        c = cases.layered_channel_case(n1, case[len("channel-"):], face_average=face_average)
        return ProblemSetup(c.problem, case, "channel", c)
    if case == "annulus-swirl":
        c = cases.annulus_swirl_case(n1)
        return ProblemSetup(c.problem, case, "annulus", c)
    if case == "cavity":
        return ProblemSetup(cases.cavity_problem(n1), case, "cavity")
    if case == "zero":
        return ProblemSetup(cases.zero_problem(n1), case, "zero")
    raise ConfigError(f"domain.case: unknown case {case!r}")


def build_problem(cfg: ProblemConfig, n: Optional[int] = None) -> ProblemSetup:
    """Problem at the configured resolution, or at ``n`` cells per direction scaled from it."""
    from .manufactured import manufactured_case, forcing_on_grid
    from .weakform import default_delta

    n1, n2 = cfg.n
    if n is not None:
        scale = n / n1
        n1, n2 = int(n), int(round(n2 * scale))
    delta_cells = cfg["solver.delta_cells"]
    if cfg.case:
        setup = _named_case(cfg.case, n1, n2, delta_cells, cfg["solver.face_average"])
        if setup.kind != "manufactured":
            setup.problem.delta = default_delta(setup.problem.grid, delta_cells)
        return setup
    domain = DomainSpec(cfg["domain.coord"], cfg["domain.extent1"], cfg["domain.extent2"])
    grid = build_grid(domain, n1, n2)
    closure = cfg["materials.closure"]
    laws = MaterialLaws(material_law(cfg, "eta"), material_law(cfg, "b"))
    rho = mu = None
    if closure == "explicit":
        X1, X2 = grid.centers()
        rho = expression("materials.rho", cfg["materials.rho"])(X1, X2)
        mu = expression("materials.mu", cfg["materials.mu"])(X1, X2)
        if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
            raise ConfigError("materials.mu: viscosity must be finite and positive")
    kind = cfg["forcing.kind"]
    mc = manufactured_case(cfg["forcing.case"]) if kind == "manufactured" else None
    bc_given = any(cfg.source(f"bc.{k}") != "default" for k in ("u1", "u2", "swirl"))
    walls = tuple(w.strip() for w in cfg["bc.walls"].split(",") if w.strip())
    bad = [w for w in walls if w not in ("left", "right", "bottom", "top")]
    if bad:
        raise ConfigError(f"bc.walls: unknown wall(s) {', '.join(bad)}")
    if mc is not None and not bc_given:
        u1, u2, u3 = mc.velocity_fns
        bd = BoundaryData.from_functions(grid, u1=u1, u2=u2, swirl=u3, walls=walls,
                                         gauge=float(mc.phi_fn(domain.extent1[0], domain.extent2[0])))
    else:
        fns = {k: expression(f"bc.{k}", cfg[f"bc.{k}"]) for k in ("u1", "u2", "swirl")}
        bd = BoundaryData.from_functions(grid, u1=fns["u1"], u2=fns["u2"], swirl=fns["swirl"], walls=walls,
                                         gauge=cfg["bc.gauge"])
    if kind == "zero":
        forcing = ForcingField.zeros(grid)
    elif kind == "expression":
        fs = [expression(f"forcing.{k}", cfg[f"forcing.{k}"]) for k in ("f1", "f2", "f3")]
        forcing = ForcingField.from_functions(grid, *fs)
    elif kind == "manufactured":
        forcing = forcing_on_grid(mc, grid)
    else:
        forcing = _forcing_from_file(cfg, grid)
    try:
        problem = Problem(grid, laws, bd, forcing, delta=default_delta(grid, delta_cells), closure=closure,
                          rho=rho, mu=mu, name=cfg.name)
    except ValueError as exc:
        raise ConfigError(f"materials.closure: {exc}") from None
    return ProblemSetup(problem, cfg.name, "configured", None)


def _forcing_from_file(cfg: ProblemConfig, grid) -> ForcingField:
    from .io import ExportError, field_from_csv

    path = _resolve(cfg, cfg["forcing.file"])
    if not path.exists():
        raise ConfigIOError(f"forcing.file: file not found: {path}")
    try:
        f1 = field_from_csv(path, "f1", grid.shape_faces1)
        f2 = field_from_csv(path, "f2", grid.shape_faces2)
        f3 = field_from_csv(path, "f3", grid.shape_cells)
    except ExportError as exc:
        raise ConfigIOError(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(f"forcing.file: {exc}") from None
    return ForcingField(grid, f1, f2, f3)


__all__ = ["ConfigError", "ConfigIOError", "ProblemConfig", "ProblemSetup", "SCHEMA", "build_problem",
           "load_config", "material_law", "solver_config"]
