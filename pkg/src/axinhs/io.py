"""Plain-text artifacts: field CSV, legacy VTK, sparse COO, key/value summaries.

Numbers are written with 17 significant digits so files round-trip and
repeated exports of the same data are byte-identical.
"""
from __future__ import annotations

import os
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .grid import StaggeredGrid2D

CSV_HEADER = "coord_system,quantity,i,j,x1,x2,value"
LOCATIONS = ("cell", "node", "face1", "face2")


class ExportError(OSError):
    """An artifact could not be written; the message carries the path."""


def _num(v) -> str:
    return format(float(v), ".17g")


def sample_points(grid: StaggeredGrid2D, location: str):
    if location == "cell":
        return grid.centers()
    if location == "node":
        return grid.nodes()
    if location == "face1":
        return grid.faces1()
    if location == "face2":
        return grid.faces2()
    raise ValueError(f"unknown location {location!r}; use one of {', '.join(LOCATIONS)}")


def _write_text(path: Path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def field_csv_text(grid: StaggeredGrid2D, quantity: str, location: str, values, header: bool = True) -> str:
    X1, X2 = sample_points(grid, location)
    values = np.asarray(values, dtype=float)
    if values.shape != X1.shape:
        raise ValueError(f"{quantity}: shape {values.shape} does not match {location} samples {X1.shape}")
    coord = grid.coord.value
    lines = [CSV_HEADER] if header else []
    ni, nj = values.shape
    for i in range(ni):
        for j in range(nj):
            lines.append(f"{coord},{quantity},{i},{j},{_num(X1[i, j])},{_num(X2[i, j])},{_num(values[i, j])}")
    return "\n".join(lines) + "\n"


def write_field_csv(path, grid: StaggeredGrid2D, quantity: str, location: str, values) -> Path:
    return _write_text(Path(path), field_csv_text(grid, quantity, location, values))


def read_field_csv(path) -> dict:
    """Quantities of a field CSV as ``{name: (i, j, x1, x2, value)}`` arrays."""
    path = Path(path)
    try:
        with open(path, encoding="ascii") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ExportError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ValueError(f"{path}: expected header {CSV_HEADER!r}")
    rows: dict = {}
    for k, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise ValueError(f"{path}:{k}: expected 7 columns, got {len(parts)}")
        rows.setdefault(parts[1], []).append((int(parts[2]), int(parts[3]), float(parts[4]),
                                              float(parts[5]), float(parts[6])))
    out = {}
    for name, recs in rows.items():
        a = np.array(recs, dtype=float)
        out[name] = (a[:, 0].astype(int), a[:, 1].astype(int), a[:, 2], a[:, 3], a[:, 4])
    return out


def field_from_csv(path, quantity: str, shape) -> np.ndarray:
    data = read_field_csv(path)
    if quantity not in data:
        raise ValueError(f"{path}: no quantity {quantity!r}")
    i, j, _, _, v = data[quantity]
    out = np.full(shape, np.nan)
    try:
        out[i, j] = v
    except IndexError:
        raise ValueError(f"{path}: {quantity} indices exceed shape {shape}") from None
    if np.isnan(out).any():
        raise ValueError(f"{path}: {quantity} does not cover all {shape} samples")
    return out


def vtk_text(grid: StaggeredGrid2D, quantity: str, location: str, values, title: str = "") -> str:
    """Legacy ASCII structured grid holding one point-data scalar on its own sample lattice."""
    X1, X2 = sample_points(grid, location)
    values = np.asarray(values, dtype=float)
    if values.shape != X1.shape:
        raise ValueError(f"{quantity}: shape {values.shape} does not match {location} samples {X1.shape}")
    ni, nj = values.shape
    npts = ni * nj
    # VTK orders points with the first index fastest
    x1, x2, v = X1.T.ravel(), X2.T.ravel(), values.T.ravel()
    lines = ["# vtk DataFile Version 3.0", (title or quantity)[:255], "ASCII", "DATASET STRUCTURED_GRID",
             f"DIMENSIONS {ni} {nj} 1", f"POINTS {npts} double"]
    lines += [f"{_num(a)} {_num(b)} 0" for a, b in zip(x1, x2)]
    lines += [f"POINT_DATA {npts}", f"SCALARS {quantity} double 1", "LOOKUP_TABLE default"]
    lines += [_num(a) for a in v]
    return "\n".join(lines) + "\n"


def write_vtk(path, grid: StaggeredGrid2D, quantity: str, location: str, values, title: str = "") -> Path:
    return _write_text(Path(path), vtk_text(grid, quantity, location, values, title))


def coo_text(matrix) -> str:
    """``i j value`` lines, row-major, explicit zeros dropped."""
    M = sp.coo_matrix(matrix)
    M.sum_duplicates()
    order = np.lexsort((M.col, M.row))
    order = order[M.data[order] != 0.0]
    lines = [f"# {M.shape[0]} {M.shape[1]} {order.size}"]
    lines += [f"{M.row[k]} {M.col[k]} {_num(M.data[k])}" for k in order]
    return "\n".join(lines) + "\n"


def write_coo(path, matrix) -> Path:
    return _write_text(Path(path), coo_text(matrix))


def read_coo(path) -> sp.csr_matrix:
    path = Path(path)
    try:
        text = Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise ExportError(f"cannot read {path}: {exc.strerror or exc}") from exc
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing shape line")
    n, m, _ = (int(t) for t in lines[0][1:].split())
    body = [ln.split() for ln in lines[1:] if ln.strip()]
    if not body:
        return sp.csr_matrix((n, m))
    a = np.array(body, dtype=float)
    return sp.csr_matrix((a[:, 2], (a[:, 0].astype(int), a[:, 1].astype(int))), shape=(n, m))


def summary_text(items: Mapping) -> str:
    lines = []
    for key, val in items.items():
        if " " in str(key):
            raise ValueError(f"summary key {key!r} contains a space")
        if isinstance(val, (bool, np.bool_)):
            s = "true" if val else "false"
        elif isinstance(val, (int, np.integer)):
            s = str(int(val))
        elif isinstance(val, (float, np.floating)):
            s = _num(val)
        else:
            s = str(val).replace("\n", " ")
        lines.append(f"{key} {s}")
    return "\n".join(lines) + "\n"


def write_summary(path, items: Mapping) -> Path:
    return _write_text(Path(path), summary_text(items))


def read_summary(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="ascii").splitlines():
        if line.strip():
            key, _, val = line.partition(" ")
            out[key] = val
    return out


def write_iteration_log(path, bundle) -> Path:
    return _write_text(Path(path), bundle.iteration_log_text())


def bundle_quantities(bundle) -> dict:
    """Exported quantities of a solution as ``{name: (location, values)}``."""
    from .fields import divergence_residual
    from .weakform import strong_residual_forcing

    u = bundle.u_total
    g = u.grid
    out = {
        "u1": ("face1", u.u1),
        "u2": ("face2", u.u2),
        "swirl": ("cell", u.swirl_or_zero),
        "phi": ("node", bundle.phi_total.values),
        "rho": ("cell", bundle.rho.values),
        "mu": ("cell", bundle.mu),
        "divergence": ("cell", divergence_residual(u)),
    }
    r = strong_residual_forcing(bundle.rho, bundle.mu, u, mode=bundle.config.face_average)
    f = bundle.problem.forcing
    interior1 = np.ones(g.shape_faces1, bool)
    interior1[[0, -1], :] = False
    if g.domain.has_axis:
        interior1[0, :] = False
    interior2 = np.ones(g.shape_faces2, bool)
    interior2[:, [0, -1]] = False
    out["residual_u1"] = ("face1", np.where(interior1, r.f1 - f.f1, 0.0))
    out["residual_u2"] = ("face2", np.where(interior2, r.f2 - f.f2, 0.0))
    out["residual_swirl"] = ("cell", r.f3 - f.f3)
    return out


def export_fields(bundle, fmt: str, directory, case: str, quantities: Iterable[str] | None = None) -> list[Path]:
    """One file per quantity named ``<case>_<quantity>.<ext>``; returns the paths written."""
    fmt = fmt.lower()
    if fmt not in ("csv", "vtk"):
        raise ValueError(f"unknown export format {fmt!r}; use csv or vtk")
    directory = Path(directory)
    data = bundle_quantities(bundle)
    names = list(data) if quantities is None else list(quantities)
    unknown = [q for q in names if q not in data]
    if unknown:
        raise ValueError(f"unknown quantities {unknown}; available: {', '.join(data)}")
    g = bundle.u_total.grid
    paths = []
    for q in names:
        loc, vals = data[q]
        path = directory / f"{case}_{q}.{fmt}"
        if fmt == "csv":
            paths.append(write_field_csv(path, g, q, loc, vals))
        else:
            paths.append(write_vtk(path, g, q, loc, vals, title=f"{case} {q}"))
    return paths


def oracle_csv_text(coord: str, quantity: str, coordinate: str, xs, values) -> str:
    """One-dimensional oracle samples in the field CSV schema (``j = 0``)."""
    lines = [CSV_HEADER]
    for i, (x, v) in enumerate(zip(np.asarray(xs, float), np.asarray(values, float))):
        x1, x2 = (x, 0.0) if coordinate == "x1" else (0.0, x)
        lines.append(f"{coord},{quantity},{i},0,{_num(x1)},{_num(x2)},{_num(v)}")
    return "\n".join(lines) + "\n"


def write_oracle_csv(path, coord: str, quantity: str, coordinate: str, xs, values) -> Path:
    return _write_text(Path(path), oracle_csv_text(coord, quantity, coordinate, xs, values))


def ensure_writable(directory) -> Path:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create {directory}: {exc.strerror or exc}") from exc
    if not os.access(directory, os.W_OK):
        raise ExportError(f"cannot write to {directory}")
    return directory
