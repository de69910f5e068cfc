from __future__ import annotations

import numpy as np
import pytest

from axinhs.config import ConfigError, ConfigIOError, build_problem, load_config, material_law, solver_config


def write(tmp_path, text, name="p.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_config_defaults(tmp_path):
    cfg = load_config(write(tmp_path, "[domain]\nn = 8\n"))
    sc = solver_config(cfg)
    assert sc.lambda_schedule == (0.25, 0.5, 0.75, 1.0)
    assert sc.picard_tol == 1e-8
    assert cfg["solver.delta_cells"] == 4.0
    assert cfg.source("solver.picard_tol") == "default"
    assert cfg.source("domain.n") == "file"
    assert any("[default]" in line for line in cfg.report_lines())


def test_override_provenance(tmp_path):
    cfg = load_config(write(tmp_path, "[domain]\nn = 8\n"), ["domain.n=12", "solver.picard_tol=1e-9"])
    assert cfg["domain.n"] == 12 and cfg.source("domain.n") == "--set"
    assert cfg["solver.picard_tol"] == 1e-9


def test_parse_error_has_line_number(tmp_path):
    with pytest.raises(ConfigError, match=r"p\.ini:3"):
        load_config(write(tmp_path, "[domain]\nn = 8\nnonsense line\n"))


def test_unknown_key_and_section(tmp_path):
    with pytest.raises(ConfigError, match="domain.size"):
        load_config(write(tmp_path, "[domain]\nsize = 8\n"))
    with pytest.raises(ConfigError, match="mesh"):
        load_config(write(tmp_path, "[mesh]\nn = 8\n"))


def test_bad_value_names_field(tmp_path):
    with pytest.raises(ConfigError, match="solver.picard_tol"):
        load_config(write(tmp_path, "[solver]\npicard_tol = fast\n"))


def test_inverted_density_bounds(tmp_path):
    with pytest.raises(ConfigError, match="materials.rho_bounds"):
        load_config(write(tmp_path, "[materials]\neta = 0:1, 1:2\nrho_bounds = 2, 1\n"))


def test_resolution_floor(tmp_path):
    with pytest.raises(ConfigError, match="domain.n"):
        load_config(write(tmp_path, "[domain]\nn = 3\n"))


def test_missing_table_echoes_path(tmp_path):
    cfg = load_config(write(tmp_path, "[materials]\neta = tables/eta.txt\n"))
    with pytest.raises(ConfigIOError, match="tables/eta.txt"):
        material_law(cfg, "eta")


def test_table_file_and_inline_agree(tmp_path):
    (tmp_path / "eta.txt").write_text("# s rho\n0 1\n1 2\n")
    a = material_law(load_config(write(tmp_path, "[materials]\neta = eta.txt\n")), "eta")
    b = material_law(load_config(write(tmp_path, "[materials]\neta = 0:1, 1:2\n", "q.ini")), "eta")
    s = np.linspace(-1, 2, 13)
    assert np.array_equal(a(s), b(s))


def test_unknown_case(tmp_path):
    with pytest.raises(ConfigError, match="domain.case"):
        load_config(write(tmp_path, "[domain]\ncase = teapot\n"))


def test_configured_problem_builds(tmp_path):
    cfg = load_config(write(tmp_path, "[domain]\nn = 8\n[bc]\nswirl = r\nwalls = top\n"
                                      "[forcing]\nkind = expression\nf3 = r*z\n"))
    setup = build_problem(cfg)
    p = setup.problem
    assert p.grid.n1 == 8 and setup.kind == "configured"
    assert np.array_equal(p.boundary.traces.swirl["top"], p.grid.x1_centers)
    assert np.allclose(p.forcing.f3, np.prod(p.grid.centers(), axis=0))


def test_bad_expression_names_field(tmp_path):
    cfg = load_config(write(tmp_path, "[domain]\nn = 8\n[bc]\nswirl = q**2\n"))
    with pytest.raises(ConfigError, match="bc.swirl"):
        build_problem(cfg)


def test_missing_forcing_file_is_io_error(tmp_path):
    with pytest.raises(ConfigIOError, match="nowhere.csv"):
        cfg = load_config(write(tmp_path, "[domain]\nn = 8\n[forcing]\nkind = file\nfile = nowhere.csv\n"))
        build_problem(cfg)


def test_named_case_ladder_scaling(tmp_path):
    cfg = load_config(write(tmp_path, "[domain]\ncase = annulus-swirl\nn = 16\n"))
    assert build_problem(cfg, 32).problem.grid.n1 == 32
