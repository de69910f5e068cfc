"""Bounded material laws: density closure eta and viscosity law b."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np


class Interpolation(enum.Enum):
    PIECEWISE_CONSTANT = "constant"
    PIECEWISE_LINEAR = "linear"
    ANALYTIC = "analytic"

    @classmethod
    def parse(cls, value) -> "Interpolation":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for member in cls:
            if key in (member.value, member.name.lower(), member.name.lower().replace("_", "")):
                return member
        raise ValueError(f"unknown interpolation {value!r}")


@dataclass(frozen=True)
class MaterialLaw:
    """A scalar law clamped into ``[lower, upper]``.

    Table laws use constant extrapolation outside the breakpoint range.  Step
    tables are right-closed: at a breakpoint the new value applies.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    lower: float
    upper: float
    interpolation: Interpolation = Interpolation.PIECEWISE_LINEAR
    func: Optional[Callable] = None

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).ravel()
        vals = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "interpolation", Interpolation.parse(self.interpolation))
        if not (0 < self.lower <= self.upper):
            raise ValueError(f"invalid bounds [{self.lower}, {self.upper}]")
        if self.interpolation is Interpolation.ANALYTIC:
            if self.func is None:
                raise ValueError("analytic law needs a function")
            return
        if bp.size == 0:
            raise ValueError("empty material table")
        if bp.size != vals.size:
            raise ValueError("breakpoints and values differ in length")
        if np.any(np.diff(bp) < 0):
            raise ValueError("breakpoints must be sorted")
        if np.any(vals < self.lower) or np.any(vals > self.upper):
            raise ValueError(f"table values outside bounds [{self.lower}, {self.upper}]")

    @classmethod
    def from_table(cls, pairs, lower, upper, interpolation="linear") -> "MaterialLaw":
        pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
        if pairs.shape[0] == 0:
            raise ValueError("empty material table")
        return cls(pairs[:, 0], pairs[:, 1], float(lower), float(upper), interpolation)

    @classmethod
    def constant(cls, value, lower=None, upper=None) -> "MaterialLaw":
        lower = value if lower is None else lower
        upper = value if upper is None else upper
        return cls(np.array([0.0]), np.array([float(value)]), float(lower), float(upper),
                   Interpolation.PIECEWISE_CONSTANT)

    @classmethod
    def from_function(cls, func, lower, upper) -> "MaterialLaw":
        return cls(np.empty(0), np.empty(0), float(lower), float(upper), Interpolation.ANALYTIC, func)

    @property
    def is_constant(self) -> bool:
        return self.interpolation is not Interpolation.ANALYTIC and np.all(self.values == self.values[0])

    @property
    def is_continuous(self) -> bool:
        if self.interpolation is Interpolation.PIECEWISE_CONSTANT:
            return self.is_constant
        return True

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.interpolation is Interpolation.ANALYTIC:
            out = np.asarray(self.func(s), dtype=float) + np.zeros_like(s)
        elif self.interpolation is Interpolation.PIECEWISE_LINEAR:
            out = np.interp(s, self.breakpoints, self.values)
        else:
            k = np.searchsorted(self.breakpoints, s, side="right") - 1
            out = self.values[np.clip(k, 0, self.values.size - 1)]
        return np.clip(out, self.lower, self.upper)


def eval_material_law(table: MaterialLaw, s):
    out = table(s)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class MaterialLaws:
    eta: MaterialLaw
    b: MaterialLaw

    @property
    def rho_bounds(self):
        return self.eta.lower, self.eta.upper

    @property
    def mu_bounds(self):
        return self.b.lower, self.b.upper

    @property
    def is_constant(self) -> bool:
        return self.eta.is_constant and self.b.is_constant


def read_table(path) -> np.ndarray:
    """Two-column ``s value`` text file; ``#`` starts a comment."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read material table {path}: {exc.strerror}") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected two columns, got {len(parts)}")
        rows.append((float(parts[0]), float(parts[1])))
    return np.array(rows, dtype=float).reshape(-1, 2)


def write_table(path, law: MaterialLaw) -> None:
    with open(path, "w") as fh:
        for s, v in zip(law.breakpoints, law.values):
            fh.write(f"{float(s)!r} {float(v)!r}\n")
