import json
import os

import numpy as np
import pytest

from plastopt import cli, fileio
from plastopt.config import ConfigError, load_config
from plastopt.mesh import build_rect_mesh

SIMULATE_1D = """
[run]
mode = simulate

[mesh]
dim = 1
nx = 8

[material]
mu = 0.5
lame_lambda = 0.0
sigma_y = 1.0

[time]
t_final = 1.0
steps = 50

[solver]
scheme = implicit
lam = 0.0

[drive]
preset = ramp
amplitude = 2.0
"""

SIMULATE_2D = """
[run]
mode = simulate

[mesh]
dim = 2
nx = 4
ny = 4

[material]
mu = 0.5
lame_lambda = 0.0
sigma_y = 0.5

[time]
t_final = 1.0
steps = 40

[solver]
scheme = implicit
lam = 0.0

[drive]
preset = shear
amplitude = 2.0
"""

RATE_STUDY = """
[run]
mode = rate-study

[material]
mu = 0.5
lame_lambda = 0.0
sigma_y = 1.0

[rate_study]
lambdas = 1e-1, 1e-2, 1e-3
steps = 2000
t_final = 1.0
"""

ORACLE = """
[run]
mode = oracle-1d
"""


def write_cfg(tmp_path, text, name="scenario.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run_cli(tmp_path, text, out="out", extra=()):
    cfg = write_cfg(tmp_path, text)
    outdir = str(tmp_path / out)
    code = cli.main(["--config", cfg, "--out", outdir, *extra])
    return code, outdir


# -- config parsing ---------------------------------------------------------

def test_unknown_key_rejected(tmp_path):
    path = write_cfg(tmp_path, SIMULATE_1D + "\nwobble = 3\n")
    with pytest.raises(ConfigError, match="wobble"):
        load_config(path)


def test_unknown_section_rejected(tmp_path):
    path = write_cfg(tmp_path, SIMULATE_1D + "\n[turbo]\nboost = 1\n")
    with pytest.raises(ConfigError, match="turbo"):
        load_config(path)


def test_missing_required_key_rejected(tmp_path):
    text = SIMULATE_1D.replace("sigma_y = 1.0", "")
    path = write_cfg(tmp_path, text)
    with pytest.raises(ConfigError, match="sigma_y"):
        load_config(path)


def test_mode_override(tmp_path):
    path = write_cfg(tmp_path, SIMULATE_1D)
    cfg = load_config(path, mode_override="oracle-1d")
    assert cfg["run"]["mode"] == "oracle-1d"


def test_bad_values_rejected(tmp_path):
    for repl in (("mu = 0.5", "mu = -1.0"),
                 ("steps = 50", "steps = 0"),
                 ("scheme = implicit", "scheme = magic"),
                 ("preset = ramp", "preset = shear")):
        path = write_cfg(tmp_path, SIMULATE_1D.replace(*repl))
        with pytest.raises(ConfigError):
            load_config(path)


def test_cli_exit_2_on_config_error(tmp_path, capsys):
    code, _ = run_cli(tmp_path, SIMULATE_1D + "\nwobble = 3\n")
    assert code == 2
    rec = json.loads(capsys.readouterr().err.strip())
    assert rec["exit_code"] == 2
    assert "wobble" in rec["message"]


# -- simulate ---------------------------------------------------------------

def test_simulate_writes_artifacts_and_manifest(tmp_path):
    code, outdir = run_cli(tmp_path, SIMULATE_1D)
    assert code == 0
    names = set(os.listdir(outdir))
    assert {"mesh.txt", "u_final.csv", "sigma_final.csv", "z_final.csv",
            "diagnostics.csv", "summary.csv", "trajectory.png",
            "MANIFEST.txt"} <= names
    manifest = open(os.path.join(outdir, "MANIFEST.txt")).read()
    for name in names - {"MANIFEST.txt"}:
        assert name in manifest


def test_simulate_constant_controls_zero_stress_rate(tmp_path):
    text = SIMULATE_1D.replace("amplitude = 2.0", "amplitude = 0.0")
    code, outdir = run_cli(tmp_path, text)
    assert code == 0
    header, rows = fileio.read_csv(os.path.join(outdir, "diagnostics.csv"))
    col = header.index("sigma_rate_l2")
    assert all(row[col] == 0.0 for row in rows)


def test_manifest_stable_across_runs(tmp_path):
    _, out1 = run_cli(tmp_path, SIMULATE_2D, out="a")
    _, out2 = run_cli(tmp_path, SIMULATE_2D, out="b")
    m1 = open(os.path.join(out1, "MANIFEST.txt")).read()
    m2 = open(os.path.join(out2, "MANIFEST.txt")).read()
    assert m1 == m2


def test_simulate_2d_plastic_trace_free(tmp_path):
    code, outdir = run_cli(tmp_path, SIMULATE_2D)
    assert code == 0
    header, rows = fileio.read_csv(os.path.join(outdir, "summary.csv"))
    summary = dict(zip(header, rows[0]))
    assert summary["max_abs_trace_z"] <= 1e-12
    assert summary["sigma_rate_l2l2"] <= 1.05 * summary["apriori_bound"]


# -- round trips -------------------------------------------------------------

def test_mesh_and_field_round_trip(tmp_path):
    mesh = build_rect_mesh(3, 2, dirichlet_spec="left+top")
    path = str(tmp_path / "mesh.txt")
    fileio.write_mesh(path, mesh)
    back = fileio.read_mesh(path)
    np.testing.assert_array_equal(mesh.nodes, back.nodes)
    np.testing.assert_array_equal(mesh.cells, back.cells)
    assert mesh.facet_tags == back.facet_tags
    np.testing.assert_array_equal(mesh.dirichlet_nodes, back.dirichlet_nodes)

    rng = np.random.default_rng(0)
    u = rng.normal(size=(mesh.n_nodes, 2)) * np.pi
    upath = str(tmp_path / "u.csv")
    fileio.write_field_p1(upath, mesh, u)
    np.testing.assert_array_equal(u, fileio.read_field_p1(upath, mesh))

    s = rng.normal(size=(mesh.n_cells, 3)) / 3.0
    spath = str(tmp_path / "s.csv")
    fileio.write_field_p0(spath, mesh, s)
    np.testing.assert_array_equal(s, fileio.read_field_p0(spath, mesh))


def test_csv_uses_lf_and_roundtrip_floats(tmp_path):
    path = str(tmp_path / "t.csv")
    vals = [1.0 / 3.0, 0.1, 1e-300, np.pi]
    fileio.write_csv(path, ["a", "b", "c", "d"], [vals])
    raw = open(path, "rb").read()
    assert b"\r" not in raw
    _, rows = fileio.read_csv(path)
    assert rows[0] == vals  # bit-exact


# -- oracle-1d ----------------------------------------------------------------

def test_oracle_mode_stress_table(tmp_path):
    code, outdir = run_cli(tmp_path, ORACLE)
    assert code == 0
    header, rows = fileio.read_csv(os.path.join(outdir, "oracle_stress.csv"))
    table = {row[0]: row[1] for row in rows}
    assert table[0.75] == 1.0
    assert table[0.25] == 0.5
    header, rows = fileio.read_csv(os.path.join(outdir, "verification.csv"))
    assert {row[0] for row in rows} == {"linear", "two-phase", "frozen"}
    col = header.index("max_violation")
    assert all(row[col] <= 1e-10 for row in rows)


def test_oracle_selftest_failure_exits_4(tmp_path, monkeypatch, capsys):
    def broken(*args, **kwargs):
        return {"equilibrium": 0.0, "admissibility": 0.5, "flow_rule": 0.0,
                "max_violation": 0.5}
    monkeypatch.setattr(cli, "verify_weak_solution", broken)
    code, _ = run_cli(tmp_path, ORACLE)
    assert code == 4
    rec = json.loads(capsys.readouterr().err.strip())
    assert rec["exit_code"] == 4


# -- rate-study ----------------------------------------------------------------

def test_rate_study_mode(tmp_path):
    code, outdir = run_cli(tmp_path, RATE_STUDY)
    assert code == 0
    header, rows = fileio.read_csv(os.path.join(outdir, "rate_study.csv"))
    okcol = header.index("within_bound")
    assert all(row[okcol] == 1 for row in rows)
    header, rows = fileio.read_csv(os.path.join(outdir, "summary.csv"))
    order = rows[0][header.index("fitted_order_sqrt_lam")]
    assert order >= 0.45


# -- sweep ----------------------------------------------------------------------

def test_sweep_mode_disjoint_outputs(tmp_path):
    text = SIMULATE_2D.replace("mode = simulate", "mode = sweep") + (
        "\n[sweep]\nlambdas = 1e-2, 1e-3\nschemes = implicit\n")
    code, outdir = run_cli(tmp_path, text)
    assert code == 0
    subdirs = [n for n in os.listdir(outdir) if n.startswith("run_")]
    assert len(subdirs) == 2
    for sub in subdirs:
        assert os.path.exists(os.path.join(outdir, sub, "summary.csv"))
        assert os.path.exists(os.path.join(outdir, sub, "MANIFEST.txt"))
    header, rows = fileio.read_csv(os.path.join(outdir, "sweep_summary.csv"))
    assert len(rows) == 2


# -- optimize --------------------------------------------------------------------

def test_optimize_mode_small(tmp_path):
    text = """
[run]
mode = optimize

[mesh]
dim = 2
nx = 3
ny = 3

[material]
mu = 0.5
lame_lambda = 0.0
sigma_y = 0.5

[time]
t_final = 0.4
steps = 8

[solver]
scheme = explicit
lam = 0.1
huber_eps = 1e-3

[drive]
preset = shear
amplitude = 1.0

[objective]
alpha = 1e-2
theta = 0.5
maxit = 10
gtol = 1e-9
"""
    code, outdir = run_cli(tmp_path, text)
    assert code == 0
    names = set(os.listdir(outdir))
    assert {"iterations.csv", "control_opt.csv", "objective_breakdown.csv",
            "MANIFEST.txt"} <= names
    header, rows = fileio.read_csv(os.path.join(outdir, "iterations.csv"))
    objs = [row[header.index("objective")] for row in rows]
    assert objs[-1] <= objs[0]


def test_optimize_mode_requires_explicit_smoothed(tmp_path):
    text = SIMULATE_2D.replace("mode = simulate", "mode = optimize") + (
        "\n[objective]\nalpha = 1e-2\ntheta = 0.5\n")
    code, _ = run_cli(tmp_path, text)
    assert code == 2
