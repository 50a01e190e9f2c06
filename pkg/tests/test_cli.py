import subprocess
import sys

import numpy as np
import pytest

from plasmon_lab import cli
from plasmon_lab import spectral as sp
from plasmon_lab.config import load_config, parse_grid, resolve_threads
from plasmon_lab.errors import ConfigError


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


# -- commands ------------------------------------------------------------------


def test_threshold_matches_solver(tmp_path, capsys, w, kappa0):
    code, out, _ = run(capsys, "threshold", "--backend", "both", "--out-dir", tmp_path)
    assert code == 0
    header, rows = read_csv(tmp_path / "threshold.csv")
    assert header == ["kappa0", "residual", "backend"]
    assert [r[2] for r in rows] == ["quad", "trapezoid"]
    assert float(rows[0][0]) == pytest.approx(kappa0, abs=1e-12)
    assert "kappa0=" in out and "backend_diff=" in out


def test_csv_number_format(tmp_path, capsys):
    run(capsys, "dispersion", "--k-grid", "0.1,0.2", "--out-dir", tmp_path)
    header, rows = read_csv(tmp_path / "dispersion.csv")
    assert header == ["k", "tau_star", "dtau", "ddtau", "re_lambda", "method"]
    for cell in rows[0][:5]:
        mantissa, exponent = cell.split("e")
        assert len(mantissa.split(".")[1]) == 12 and exponent[0] in "+-"


def test_dispersion_values(tmp_path, capsys, w, compact, threshold):
    code, _, _ = run(capsys, "dispersion", "--k-grid", "0.1:0.5:0.2", "--out-dir", tmp_path)
    assert code == 0
    _, rows = read_csv(tmp_path / "dispersion.csv")
    assert [float(r[0]) for r in rows] == pytest.approx([0.1, 0.3, 0.5])
    for r in rows:
        ref = sp.solve_tau_star(w, compact, float(r[0]), threshold, derivatives=False).tau_star
        assert float(r[1]) == pytest.approx(ref, rel=1e-12)


def test_penrose_maxwell_exits_cleanly(tmp_path, capsys):
    code, out, _ = run(capsys, "penrose", "--profile", "maxwell", "--k-grid", "0.5:1.5:0.5", "--out-dir", tmp_path)
    assert code == 0
    header, rows = read_csv(tmp_path / "penrose.csv")
    assert header[:3] == ["k", "winding_number", "enclosed_axis_zeros"]
    assert all(r[1] == "0" for r in rows)


def test_damping_gaussian(tmp_path, capsys):
    code, _, _ = run(capsys, "damping", "--regime", "gaussian", "--k-grid", "0.4,0.5", "--out-dir", tmp_path)
    assert code == 0
    header, rows = read_csv(tmp_path / "damping_gaussian.csv")
    assert "ratio" in header and len(rows) == 2
    assert all(float(r[header.index("re_lambda_newton")]) < 0 for r in rows)


def test_dielectric_and_laplace_agree(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    base = ["dielectric", "--profile", "maxwell", "--k-grid", "0.5,1.0", "--tau-grid", "0.5,1.5", "--re-lambda", "0.5"]
    assert run(capsys, *base, "--out-dir", a)[0] == 0
    assert run(capsys, *base, "--laplace", "--out-dir", b)[0] == 0
    _, ra = read_csv(a / "dielectric.csv")
    _, rb = read_csv(b / "dielectric.csv")
    for x, y in zip(ra, rb):
        assert complex(float(x[2]), float(x[3])) == pytest.approx(complex(float(y[2]), float(y[3])), abs=1e-6)


def test_evolve_and_fit(tmp_path, capsys):
    code, out, _ = run(capsys, "evolve", "--k", "0.3", "--out-dir", tmp_path)
    assert code == 0
    header, rows = read_csv(tmp_path / "evolve.csv")
    assert header == ["k", "t", "Re", "Im", "source"]
    assert (tmp_path / "evolve_fit.txt").is_file()
    assert "frequency" in out


def test_evolve_table_kernel(tmp_path, capsys):
    r = np.linspace(0, 9, 401)
    path = tmp_path / "g.csv"
    np.savetxt(path, np.column_stack([r, np.exp(-r * r / 2)]), delimiter=",", header="r,g", comments="")
    code, _, _ = run(capsys, "evolve", "--k", "0.3", "--horizon", "5", "--kernel", f"table:{path}",
                     "--out-dir", tmp_path)
    assert code == 0


def test_green_outputs(tmp_path, capsys):
    code, _, _ = run(capsys, "green", "--k-grid", "0.3,2.0", "--t-grid", "0:2:0.5", "--r-grid", "0:20:5",
                     "--osc-t-grid", "1,2", "--out-dir", tmp_path)
    assert code == 0
    for name in ("green_remainder.csv", "green_residues.csv", "green_osc.csv"):
        assert (tmp_path / name).is_file()
    _, rows = read_csv(tmp_path / "green_osc.csv")
    assert len(rows) == 2 * 5


def test_threads_are_deterministic(tmp_path, capsys):
    outs = []
    for threads in (1, 3):
        d = tmp_path / f"t{threads}"
        assert run(capsys, "dispersion", "--k-grid", "0.05:0.6:0.05", "--threads", threads, "--out-dir", d)[0] == 0
        outs.append((d / "dispersion.csv").read_bytes())
    assert outs[0] == outs[1]


# -- usage and configuration errors ----------------------------------------------------


def test_unknown_flag_exits_2(capsys):
    assert run(capsys, "threshold", "--bogus")[0] == 2
    assert run(capsys)[0] == 2


def test_grid_errors(capsys, tmp_path):
    code, _, err = run(capsys, "dispersion", "--k-grid", "0.5,0.1", "--out-dir", tmp_path)
    assert code == 2 and "strictly increasing" in err
    with pytest.raises(ConfigError):
        parse_grid("1:0:0.1")
    with pytest.raises(ConfigError):
        parse_grid("a,b")
    assert parse_grid("0:1:0.25") == pytest.approx([0, 0.25, 0.5, 0.75, 1.0])


def test_bad_config_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("# test profile\n[profile]\nkind = maxwell\nbeta = 1.0\namplitude = -1\n")
    code, _, err = run(capsys, "threshold", "--profile", cfg)
    assert code == 2
    assert f"{cfg}:5:" in err and "amplitude" in err


def test_config_unknown_key_and_kind(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("[profile]\nkind = maxwell\nmu = 2\n")
    with pytest.raises(ConfigError, match=r"c\.cfg:3:"):
        load_config(cfg)
    cfg.write_text("[profile]\nkind = plasma\n")
    with pytest.raises(ConfigError, match=r"c\.cfg:2:"):
        load_config(cfg)
    cfg.write_text("[profile]\nkind = maxwell\n[interaction]\nkind = yukawa\n")
    with pytest.raises(ConfigError, match=r"c\.cfg:4:"):
        load_config(cfg)


def test_user_table_with_negative_density(tmp_path, capsys):
    table = tmp_path / "mu.csv"
    table.write_text("e,mu\n0,1\n0.5,0.2\n1,-0.1\n1.5,0\n")
    cfg = tmp_path / "t.cfg"
    cfg.write_text("[profile]\nkind = user_table\n\ntable = mu.csv\n")
    code, _, err = run(capsys, "threshold", "--profile", cfg)
    assert code == 2 and f"{cfg}:4:" in err


def test_valid_config_file(tmp_path, capsys, kappa0):
    cfg = tmp_path / "ok.cfg"
    cfg.write_text(f"[profile]\nkind = compact_poly\norder = 2\n[run]\noutput_dir = {tmp_path / 'out'}\n")
    assert run(capsys, "threshold", "--profile", cfg)[0] == 0
    _, rows = read_csv(tmp_path / "out" / "threshold.csv")
    assert float(rows[0][0]) == pytest.approx(kappa0, abs=1e-12)


def test_bad_thread_environment(monkeypatch, capsys, tmp_path):
    monkeypatch.setenv("PLASMON_THREADS", "zero")
    assert run(capsys, "threshold", "--out-dir", tmp_path)[0] == 2
    monkeypatch.setenv("PLASMON_THREADS", "4")
    assert resolve_threads() == 4
    assert resolve_threads(2) == 2


def test_acceptance_config_stage_failure(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[profile]\nkind = maxwell\nbeta = -2\n")
    code, out, _ = run(capsys, "acceptance", "--profile", cfg, "--out-dir", tmp_path)
    assert code == 2
    assert out.startswith("criterion  0 FAIL config-stage")
    assert (tmp_path / "acceptance.txt").read_text().startswith("criterion  0 FAIL")


def test_acceptance_subset(tmp_path, capsys):
    code, out, _ = run(capsys, "acceptance", "--criteria", "1,2", "--out-dir", tmp_path)
    assert code == 0
    lines = (tmp_path / "acceptance.txt").read_text().splitlines()
    assert [line.split()[2] for line in lines] == ["PASS", "PASS"]
    assert run(capsys, "acceptance", "--criteria", "12")[0] == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "plasmon_lab", "threshold", "--out-dir", str(tmp_path)],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert proc.stdout.startswith("profile=compact")
