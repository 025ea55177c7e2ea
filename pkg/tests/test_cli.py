import subprocess
import sys

import numpy as np
import pytest

from ehltvd.cli import EXIT_CONFIG, EXIT_OK, main
from ehltvd.config import ConfigError, case_path, parse_config
from ehltvd.grid import Field, make_hierarchy
from ehltvd.report import config_hash, emit_field, read_csv, read_field

LINEAR = """
[experiment]
kind = linear_cd
name = small
output_dir = {out}

[grid]
bounds = -1, 1
coarsest = 9
levels = 3

[linear]
eps = 1e-6
kappa = 0.3333333333333333
splitting = Ls0
cycle = 2, 1, V, 20
tol = 1e-10
"""


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_linear_run_layout_and_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("EHLTVD_OUTPUT_DIR", raising=False)
    out = tmp_path / "out"
    cfg = _write(tmp_path, LINEAR.format(out=out))
    assert main(["run", str(cfg)]) == EXIT_OK
    meta, header, rows = read_csv(out / "small_errors.csv")
    assert header == ["N", "Linf", "p_inf", "L1", "p1", "L2", "p2"]
    assert len(rows) == 3
    assert meta["config-hash"] == config_hash(cfg.read_text())
    assert meta["experiment"] == "linear_cd"
    first = (out / "small_errors.csv").read_bytes()
    hist = (out / "small_residuals.csv").read_bytes()
    assert main(["run", str(cfg)]) == EXIT_OK
    assert (out / "small_errors.csv").read_bytes() == first
    assert (out / "small_residuals.csv").read_bytes() == hist
    u = read_field(out / "small_u.txt")
    X, Y = u.level.mesh()
    assert np.abs(u.values - (X ** 4 + Y ** 4)).max() < 1e-2


def test_output_dir_env_override(tmp_path, monkeypatch):
    target = tmp_path / "elsewhere"
    monkeypatch.setenv("EHLTVD_OUTPUT_DIR", str(target))
    cfg = _write(tmp_path, LINEAR.format(out=tmp_path / "ignored"))
    assert main(["run", str(cfg)]) == EXIT_OK
    assert (target / "small_errors.csv").is_file()
    assert not (tmp_path / "ignored").exists()


@pytest.mark.parametrize("bad,needle", [
    ("[linear]\nkapa = 0.3\n", "[linear] kapa"),
    ("[linear]\ncycle = 2, 1, X, 3\n", "[linear] cycle"),
    ("[grid]\nlevels = zero\n", "[grid] levels"),
    ("[nonsense]\nx = 1\n", "[nonsense]"),
])
def test_malformed_config_names_key(tmp_path, capsys, bad, needle):
    text = "[experiment]\nkind = linear_cd\n" + bad
    cfg = _write(tmp_path, text)
    assert main(["run", str(cfg)]) == EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_ehl_config_requires_load_and_material():
    with pytest.raises(ConfigError, match=r"\[ehl\] l"):
        parse_config("[experiment]\nkind = ehl\n[ehl]\nm = 20\n")
    with pytest.raises(ConfigError, match="hybrid"):
        parse_config("[experiment]\nkind = ehl\n[ehl]\nm = 20\nl = 10\nhybrid = hs9\n")


def test_unknown_case_and_missing_file(tmp_path, capsys):
    assert main(["tables", "--case", "no_such_case"]) == EXIT_CONFIG
    assert "bundled cases" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_bundled_cases_parse():
    for name in ("linear_ls0_k13", "linear_ls0_k0", "linear_ls1_km1", "ehl_m20_l10",
                 "ehl_m20_l10_k13", "ehl_m1000_l10", "lfa_surface"):
        cfg = parse_config(case_path(name).read_text(), name)
        assert cfg.name == name


def test_lfa_subcommand(tmp_path):
    assert main(["lfa", "--eps", "1e-6", "--kappa", "0.3333333333333333", "--h", "0.015625",
                 "--samples", "32", "--out", str(tmp_path)]) == EXIT_OK
    meta, header, rows = read_csv(tmp_path / "lfa_smoothing.csv")
    assert header[:2] == ["splitting", "mu"]
    assert [r[0] for r in rows] == ["Ls0", "Ls1", "Ls2"]
    assert all(0 < r[1] < 1 for r in rows)
    _, sh, srows = read_csv(tmp_path / "lfa_surface_Ls0.csv")
    assert sh == ["theta1", "theta2", "abs_symbol"] and len(srows) == 32 * 32
    assert "config-hash" in meta
    assert main(["lfa", "--samples", "2", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_emit_field_round_trip(tmp_path):
    lv = make_hierarchy((-1.0, 1.0, -0.5, 0.5), (9, 5), 1).finest
    v = np.random.default_rng(0).standard_normal(lv.shape)
    p = emit_field(Field(lv, v), tmp_path / "f.txt")
    back = read_field(p)
    assert back.level.shape == lv.shape
    np.testing.assert_array_equal(back.values, v)


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "ehltvd.cli", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
