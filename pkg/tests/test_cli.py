from __future__ import annotations

import re

import pytest

from axinhs.cli import EXIT_CONFIG, EXIT_IO, EXIT_NONCONVERGED, EXIT_OK, main
from axinhs.io import read_summary


def config(tmp_path, body, name="run.ini"):
    p = tmp_path / name
    p.write_text(body + f"\n[output]\ndirectory = {tmp_path / 'out'}\n")
    return p


def check_rows(text):
    return re.findall(r"^(\w+)\s+(PASS|FAIL|SKIP)\s", text, flags=re.M)


@pytest.mark.parametrize("case", ["cavity", "zero", "channel-couette", "channel-poiseuille-swirl",
                                  "annulus-swirl", "cyl-smooth", "cart-swirl"])
def test_verify_builtin_cases(tmp_path, capsys, case):
    status = main(["verify", str(config(tmp_path, f"[domain]\ncase = {case}\nn = 16\n"))])
    out = capsys.readouterr().out
    rows = check_rows(out)
    assert status == EXIT_OK, out
    assert len(rows) >= 5
    assert all(r != "FAIL" for _, r in rows)
    s = read_summary(tmp_path / "out" / "summary.kv")
    assert s["check.divergence"] == "PASS" and s["exit_status"] == "0"


def test_solve_exports_and_is_deterministic(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[domain]\ncase = cavity\nn = 16\n[solver]\npicard_tol = 1e-9\n"
                   f"[output]\nformats = csv, vtk\noperators = true\ndirectory = {tmp_path / 'out'}\n")
    assert main(["solve", str(cfg)]) == EXIT_OK
    out = tmp_path / "out"
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert {"cavity_u1.csv", "cavity_u1.vtk", "cavity_phi.vtk", "cavity_iterations.log", "summary.kv",
            "cavity_A.coo", "cavity_N.coo", "cavity_report.txt"} <= set(first)
    assert b"DATASET STRUCTURED_GRID" in first["cavity_rho.vtk"]
    assert main(["solve", str(cfg)]) == EXIT_OK
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second
    summary = first["summary.kv"].decode()
    assert not re.search(r"wall_time|elapsed|seconds|date", summary)
    report = first["cavity_report.txt"].decode()
    assert "solver.picard_tol = 1e-9  [file]" in report
    assert "solver.damping = 1.0  [default]" in report
    capsys.readouterr()


def test_set_override(tmp_path, capsys):
    cfg = config(tmp_path, "[domain]\ncase = zero\nn = 8\n")
    assert main(["solve", str(cfg), "--set", "domain.n=6", "--set", "output.name=small"]) == EXIT_OK
    assert (tmp_path / "out" / "small_u1.csv").exists()
    s = read_summary(tmp_path / "out" / "summary.kv")
    assert s["n1"] == "6"
    capsys.readouterr()


def test_oracle_layered_channel(tmp_path, capsys):
    cfg = config(tmp_path, "[domain]\ncase = channel-poiseuille\nn = 16\n")
    assert main(["oracle", str(cfg)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "l2_rel_error" in out
    s = read_summary(tmp_path / "out" / "summary.kv")
    assert float(s["min_order"]) >= 1.9
    assert (tmp_path / "out" / "channel-poiseuille_oracle.csv").exists()


def test_study_table(tmp_path, capsys, monkeypatch):
    cfg = config(tmp_path, "[domain]\ncase = cart-taylor\nn = 16\n")
    assert main(["study", str(cfg)]) == EXIT_OK
    out = capsys.readouterr().out
    rows = re.findall(r"^(16|32|64)\s+(\S+)", out, flags=re.M)
    assert [r[0] for r in rows] == ["16", "32", "64"]
    errs = [float(e) for _, e in rows]
    assert errs[0] > errs[1] > errs[2]
    serial = (tmp_path / "out" / "summary.kv").read_bytes()
    monkeypatch.setenv("AXINHS_THREADS", "3")
    assert main(["study", str(cfg)]) == EXIT_OK
    assert (tmp_path / "out" / "summary.kv").read_bytes() == serial
    capsys.readouterr()


def test_study_needs_reference(tmp_path, capsys):
    assert main(["study", str(config(tmp_path, "[domain]\ncase = cavity\n"))]) == EXIT_CONFIG
    assert "domain.case" in capsys.readouterr().err


def test_config_error_exit(tmp_path, capsys):
    assert main(["solve", str(config(tmp_path, "[materials]\neta = 0:1, 1:2\nrho_bounds = 3, 1\n"))]) == EXIT_CONFIG
    assert "materials.rho_bounds" in capsys.readouterr().err


def test_parse_error_exit(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[domain]\nn = 8\ngarbage\n")
    assert main(["solve", str(p)]) == EXIT_CONFIG
    assert "bad.ini:3" in capsys.readouterr().err


def test_missing_table_exit(tmp_path, capsys):
    assert main(["solve", str(config(tmp_path, "[materials]\neta = missing/eta.txt\n"))]) == EXIT_IO
    assert "missing/eta.txt" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "none.ini")]) == EXIT_IO
    assert "none.ini" in capsys.readouterr().err


def test_non_convergence_exit_keeps_artifacts(tmp_path, capsys):
    cfg = config(tmp_path, "[domain]\ncase = cavity\nn = 12\n[solver]\npicard_max_iter = 2\nmax_bisections = 1\n")
    assert main(["solve", str(cfg)]) == EXIT_NONCONVERGED
    s = read_summary(tmp_path / "out" / "summary.kv")
    assert s["converged"] == "false" and s["exit_status"] == "3"
    assert (tmp_path / "out" / "cavity_u1.csv").exists()
    capsys.readouterr()


def test_bad_thread_setting(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("AXINHS_THREADS", "0")
    assert main(["solve", str(config(tmp_path, "[domain]\ncase = zero\nn = 6\n"))]) == EXIT_CONFIG
    capsys.readouterr()
