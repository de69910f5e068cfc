from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from axinhs.cases import cavity_problem, zero_problem
from axinhs.grid import DomainSpec, build_grid
from axinhs.io import (
    CSV_HEADER,
    ExportError,
    coo_text,
    export_fields,
    field_from_csv,
    read_coo,
    read_field_csv,
    read_summary,
    vtk_text,
    write_coo,
    write_field_csv,
    write_summary,
)
from axinhs.solver import SolverConfig, fixed_point_solve


@pytest.fixture(scope="module")
def zero_bundle():
    return fixed_point_solve(zero_problem(6))


@pytest.fixture(scope="module")
def cavity_bundle():
    return fixed_point_solve(cavity_problem(12))


def test_csv_round_trip(tmp_path):
    g = build_grid(DomainSpec("cylindrical", (0.0, 1.0), (0.0, 2.0)), 5, 4)
    vals = np.random.default_rng(0).standard_normal(g.shape_faces1)
    path = write_field_csv(tmp_path / "a.csv", g, "u1", "face1", vals)
    lines = path.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[1].startswith("cylindrical,u1,0,0,0,")
    assert np.array_equal(field_from_csv(path, "u1", g.shape_faces1), vals)


def test_csv_shape_checked(tmp_path):
    g = build_grid(DomainSpec("cartesian", (0.0, 1.0), (0.0, 1.0)), 4, 4)
    with pytest.raises(ValueError):
        write_field_csv(tmp_path / "a.csv", g, "rho", "cell", np.zeros((5, 4)))


def test_zero_solution_gives_zero_bodies(tmp_path, zero_bundle):
    paths = export_fields(zero_bundle, "csv", tmp_path, "zero", ["u1", "u2", "swirl", "phi", "divergence"])
    for p in paths:
        text = p.read_text().splitlines()
        assert text[0] == CSV_HEADER
        assert all(float(line.rsplit(",", 1)[1]) == 0.0 for line in text[1:])


def test_export_names_and_determinism(tmp_path, cavity_bundle):
    a = export_fields(cavity_bundle, "csv", tmp_path / "a", "cav")
    b = export_fields(cavity_bundle, "csv", tmp_path / "b", "cav")
    names = sorted(p.name for p in a)
    assert "cav_u1.csv" in names and "cav_rho.csv" in names and "cav_residual_swirl.csv" in names
    for p, q in zip(a, b):
        assert p.read_bytes() == q.read_bytes()


def test_vtk_structured_grid(tmp_path, cavity_bundle):
    paths = export_fields(cavity_bundle, "vtk", tmp_path, "cav", ["phi"])
    text = paths[0].read_text().splitlines()
    assert text[0].startswith("# vtk DataFile")
    assert "DATASET STRUCTURED_GRID" in text
    assert "DIMENSIONS 13 13 1" in text
    assert "POINT_DATA 169" in text


def test_vtk_point_order_first_index_fastest():
    g = build_grid(DomainSpec("cartesian", (0.0, 1.0), (0.0, 1.0)), 2, 2)
    vals = np.arange(4.0).reshape(2, 2)
    lines = vtk_text(g, "rho", "cell", vals).splitlines()
    k = lines.index("LOOKUP_TABLE default")
    assert lines[k + 1:k + 5] == ["0", "2", "1", "3"]


def test_unknown_format_and_quantity(tmp_path, zero_bundle):
    with pytest.raises(ValueError):
        export_fields(zero_bundle, "hdf5", tmp_path, "z")
    with pytest.raises(ValueError):
        export_fields(zero_bundle, "csv", tmp_path, "z", ["pressure"])


def test_unwritable_path_reports_path(tmp_path, zero_bundle):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ExportError, match="file"):
        export_fields(zero_bundle, "csv", blocker / "sub", "z")


def test_coo_round_trip(tmp_path):
    M = sp.random(7, 5, density=0.4, random_state=1, format="csr")
    path = write_coo(tmp_path / "m.coo", M)
    assert path.read_text().splitlines()[0] == f"# 7 5 {M.nnz}"
    assert abs(read_coo(path) - M).max() == 0.0
    assert coo_text(M) == coo_text(M.tocoo())


def test_summary_round_trip(tmp_path):
    path = write_summary(tmp_path / "summary.kv", {"order": 1.99, "ok": True, "n": 32, "case": "cavity"})
    assert read_summary(path) == {"order": "1.99", "ok": "true", "n": "32", "case": "cavity"}
    with pytest.raises(ValueError):
        write_summary(tmp_path / "bad.kv", {"two words": 1})


def test_read_field_csv_rejects_wrong_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_field_csv(p)
