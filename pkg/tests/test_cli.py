import json

import pytest

from nonlocal_delaunay import cli


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = cli.run_command(list(argv) + ["--out", str(out)])
    return code, out


def test_unknown_flag_is_usage_error(tmp_path):
    code, _ = run(tmp_path, "rstar", "--foo")
    assert code == 2


def test_unknown_command_is_usage_error():
    assert cli.run_command(["frobnicate"]) == 2


@pytest.mark.parametrize("text,needle", [
    ("[kernel]\nfoo = 1\n", "kernel.foo"),
    ("[nonsense]\nx = 1\n", "nonsense"),
    ("[kernel]\nalpha = 1.5\n", "alpha must lie in (0,1)"),
    ("[quadrature]\nlattice_kmax = 4\n", "lattice_kmax"),
    ("[quadrature]\nrel_tol = abc\n", "quadrature.rel_tol"),
    ("kernel = 1\n", "line"),
])
def test_config_errors_name_the_problem(tmp_path, capsys, text, needle):
    path = tmp_path / "c.ini"
    path.write_text(text)
    code, _ = run(tmp_path, "hr", "--config", str(path))
    assert code == 2
    assert needle in capsys.readouterr().err


def test_empty_config_gives_defaults(tmp_path):
    path = tmp_path / "empty.ini"
    path.write_text("")
    raw, vals = cli.load_config(str(path))
    assert raw["kernel"]["family"] == "isotropic"
    assert vals["quad"].trunc_T == 50.0 and vals["branch"]["modes"] == 16


def test_flags_override_config(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[kernel]\nalpha = 0.3\n[spectrum]\nradii = 2.0\n")
    code, out = run(tmp_path, "hr", "--config", str(path), "--alpha", "0.7")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["kernel"]["alpha"] == "0.7"
    assert man["config"]["spectrum"]["radii"] == "2.0"


def test_rstar_outputs_and_manifest(tmp_path, capsys):
    code, out = run(tmp_path, "rstar", "--kernel", "isotropic", "--alpha", "0.5")
    assert code == 0
    assert "R* = 0.52094438" in capsys.readouterr().out
    res = json.loads((out / "rstar.json").read_text())
    assert abs(res["mu1_at_R_star"]) <= 1e-8
    man = json.loads((out / "manifest.json").read_text())
    # every section is echoed, defaults included
    assert set(man["config"]) == set(cli.SCHEMA)
    assert man["config"]["quadrature"]["rel_tol"] == "1e-08"
    assert man["status"] == "ok" and "mu1_vs_R.csv" in man["outputs"]
    assert (out / "mu1_vs_R.csv").read_text().startswith("R,mu1\n")


def test_rerun_from_manifest_is_byte_identical(tmp_path, monkeypatch):
    code, first = run(tmp_path, "anmc", "--profile", "1,0.2", "--points", "5")
    assert code == 0
    # rerun from the resolved config with the output directory moved by the environment
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "second"))
    assert cli.run_command(["anmc", "--config", str(first / "resolved.ini")]) == 0
    second = tmp_path / "second"
    for name in ("anmc.json", "anmc.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_spectrum_csv(tmp_path):
    code, out = run(tmp_path, "spectrum", "--kmax", "64")
    assert code == 0
    lines = (out / "mu_vs_k.csv").read_text().splitlines()
    assert lines[0] == "k,mu,ratio" and len(lines) == 66
    assert lines[1].startswith("0,") and lines[1].endswith(",")


def test_branch_profiles(tmp_path):
    code, out = run(tmp_path, "branch", "--alpha", "0.5", "--a-max", "0.02", "--a-steps", "2", "--modes", "8")
    assert code == 0
    names = sorted(p.name for p in out.glob("profile_*.csv"))
    assert names == ["profile_0.01.csv", "profile_0.02.csv", "profile_0.csv"]
    assert (out / "profile_0.02.csv").read_text().startswith("s,w\n")
    res = json.loads((out / "branch.json").read_text())
    assert res["max_anmc_residual"] <= 1e-5


def test_compare_csv(tmp_path):
    code, out = run(tmp_path, "compare", "--omega", "0.5", "--levels", "128,256")
    assert code == 0
    lines = (out / "omega_scan.csv").read_text().splitlines()
    assert lines[0] == "omega,panp_balls,panp_band,winner" and len(lines) == 2


def test_compare_rejects_oversized_volume(tmp_path, capsys):
    code, _ = run(tmp_path, "compare", "--omega", "40")
    assert code == 2
    assert "invalid-parameter" in capsys.readouterr().err


def test_hypothesis_failure_exits_one(tmp_path):
    # the l1 kernel is not C^{1,1} on the axes, so one hypothesis check fails
    code, out = run(tmp_path, "kernel-check", "--kernel", "lp", "--p", "1")
    assert code == 1
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "assertion-failed"


def test_riesz_and_gcheck(tmp_path):
    assert run(tmp_path, "riesz-check", "--trials", "50", name="r")[0] == 0
    assert run(tmp_path, "g-check", "--x2", "0.1,1,5", name="g")[0] == 0


def test_rearrange_suite_csv(tmp_path):
    code, out = run(tmp_path, "rearrange", "--seeds", "3", "--operator", "cylindrical", "--nx", "32", "--ny", "32")
    assert code == 0
    assert (out / "suite_cylindrical.csv").read_text().startswith("seed,panp_before,panp_after,margin,error\n")


def test_perimeter_from_rle(tmp_path):
    from nonlocal_delaunay import perimeter as pm
    E = pm.random_gridset(1, 32, 32)
    path = tmp_path / "set.rle"
    path.write_text(E.to_rle())
    code, out = run(tmp_path, "perimeter", "--input", str(path))
    assert code == 0
    res = json.loads((out / "perimeter.json").read_text())
    assert res["grid"]["cells"] == E.cell_count and "profile" not in res


def test_csv_only_format(tmp_path):
    code, out = run(tmp_path, "hr", "--formats", "csv")
    assert code == 0
    assert (out / "h_vs_R.csv").exists() and not (out / "hr.json").exists()


def test_emit_plot_data_needs_artifacts(tmp_path):
    with pytest.raises(cli.ConfigError):
        cli.emit_plot_data(tmp_path)
    code, out = run(tmp_path, "hr", "--radii", "0.5,1")
    (out / "h_vs_R.csv").unlink()
    assert cli.emit_plot_data(out) == ["h_vs_R.csv"]
    assert (out / "h_vs_R.csv").read_text().count("\n") == 3
